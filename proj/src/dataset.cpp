#include "qgrace/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "qgrace/error.hpp"

namespace qgrace::data {

namespace {

bool is_blank_or_comment(const std::string& line) {
  auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void check_edges(const std::vector<Edge>& edges, std::size_t m, std::size_t n,
                 const char* what) {
  for (const auto& e : edges) {
    if (e.user >= m || e.item >= n) {
      throw std::invalid_argument(std::string(what) + ": edge index out of range");
    }
  }
}

}  // namespace

Index IdMap::intern(const std::string& raw) {
  auto [it, inserted] = index_.try_emplace(raw, static_cast<Index>(raws_.size()));
  if (inserted) raws_.push_back(raw);
  return it->second;
}

InteractionDataset parse_interactions(std::istream& in) {
  InteractionDataset ds;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    std::istringstream fields(line);
    std::string raw_user, raw_item;
    if (!(fields >> raw_user >> raw_item)) {
      throw ParseError("expected '<user> <item>', got '" + line + "'", line_no);
    }
    Edge e{ds.users.intern(raw_user), ds.items.intern(raw_item)};
    if (seen.insert(edge_key(e)).second) ds.edges.push_back(e);
  }
  if (ds.edges.empty()) throw ParseError("no interactions in input", 0);
  return ds;
}

InteractionDataset load_interactions(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  return parse_interactions(in);
}

SplitSizes split_sizes(std::size_t n, const SplitRatios& r) {
  if (!(r.train > 0 && r.validation > 0 && r.test > 0) ||
      std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  }
  // The epsilon absorbs representation error such as 0.7 * 10 = 6.999...
  auto take = [n](double ratio) {
    return std::min(n, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
  };
  SplitSizes s{};
  s.train = take(r.train);
  s.validation = std::min(n - s.train, take(r.validation));
  s.test = n - s.train - s.validation;
  return s;
}

SplitDataset::SplitDataset(IdMap users, IdMap items, std::vector<Edge> train,
                           std::vector<Edge> validation, std::vector<Edge> test,
                           std::vector<Edge> noise)
    : users_(std::move(users)),
      items_(std::move(items)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      test_(std::move(test)),
      noise_(std::move(noise)) {
  const auto m = users_.size();
  const auto n = items_.size();
  check_edges(train_, m, n, "train");
  check_edges(validation_, m, n, "validation");
  check_edges(test_, m, n, "test");
  check_edges(noise_, m, n, "noise");

  train_items_.assign(m, {});
  for (const auto& e : train_) train_items_[e.user].push_back(e.item);
  for (auto& items : train_items_) std::sort(items.begin(), items.end());
  for (Index u = 0; u < m; ++u) {
    if (train_items_[u].empty()) users_without_train_.push_back(u);
  }
  for (const auto& e : noise_) {
    noise_keys_.insert(edge_key(e));
    if (!in_train(e.user, e.item)) throw std::invalid_argument("noise edge missing from train");
  }
}

bool SplitDataset::in_train(Index u, Index i) const {
  const auto& items = train_items_[u];
  return std::binary_search(items.begin(), items.end(), i);
}

SplitDataset split_dataset(const InteractionDataset& ds, const SplitRatios& ratios,
                           std::uint64_t seed) {
  const auto sizes = split_sizes(ds.edges.size(), ratios);
  auto edges = ds.edges;
  auto rng = make_stream(seed, streams::kSplit);
  std::shuffle(edges.begin(), edges.end(), rng);

  auto first = edges.begin();
  std::vector<Edge> train(first, first + static_cast<std::ptrdiff_t>(sizes.train));
  first += static_cast<std::ptrdiff_t>(sizes.train);
  std::vector<Edge> validation(first, first + static_cast<std::ptrdiff_t>(sizes.validation));
  first += static_cast<std::ptrdiff_t>(sizes.validation);
  std::vector<Edge> test(first, edges.end());
  return SplitDataset(ds.users, ds.items, std::move(train), std::move(validation),
                      std::move(test));
}

SplitDataset inject_noise(const SplitDataset& split, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("noise ratio must be in [0,1]");
  const auto count = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(split.train().size()) + 1e-9));
  if (count == 0) return split;

  std::unordered_set<std::uint64_t> occupied;
  for (const auto* part : {&split.train(), &split.validation(), &split.test()}) {
    for (const auto& e : *part) occupied.insert(edge_key(e));
  }
  const std::size_t m = split.num_users();
  const std::size_t n = split.num_items();
  if (occupied.size() + count > m * n) {
    throw SamplingError("graph too dense to place " + std::to_string(count) + " noise edges");
  }

  std::uniform_int_distribution<Index> pick_user(0, static_cast<Index>(m - 1));
  std::uniform_int_distribution<Index> pick_item(0, static_cast<Index>(n - 1));
  std::vector<Edge> noise;
  noise.reserve(count);
  const std::size_t max_attempts = 1000 * count + 1000;
  std::size_t attempts = 0;
  while (noise.size() < count) {
    if (++attempts > max_attempts) {
      throw SamplingError("gave up placing noise edges after " + std::to_string(max_attempts) +
                          " attempts");
    }
    Edge e{pick_user(rng), pick_item(rng)};
    if (occupied.insert(edge_key(e)).second) noise.push_back(e);
  }

  auto train = split.train();
  train.insert(train.end(), noise.begin(), noise.end());
  auto all_noise = split.noise();
  all_noise.insert(all_noise.end(), noise.begin(), noise.end());
  return SplitDataset(split.users(), split.items(), std::move(train), split.validation(),
                      split.test(), std::move(all_noise));
}

TrainBatch make_batch(std::vector<Edge> positives, std::vector<Edge> negatives,
                      std::size_t k_neg) {
  if (negatives.size() != positives.size() * k_neg) {
    throw std::invalid_argument("make_batch: expected k_neg negatives per positive");
  }
  TrainBatch b;
  b.positives = std::move(positives);
  b.negatives = std::move(negatives);
  b.k_neg = k_neg;
  const auto pairs = b.num_pairs();
  for (std::size_t p = 0; p < pairs; ++p) {
    b.users_unique.push_back(b.pair(p).user);
    b.items_unique.push_back(b.pair(p).item);
  }
  for (auto* v : {&b.users_unique, &b.items_unique}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  b.user_slot.resize(pairs);
  b.item_slot.resize(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto& e = b.pair(p);
    b.user_slot[p] = static_cast<std::uint32_t>(
        std::lower_bound(b.users_unique.begin(), b.users_unique.end(), e.user) -
        b.users_unique.begin());
    b.item_slot[p] = static_cast<std::uint32_t>(
        std::lower_bound(b.items_unique.begin(), b.items_unique.end(), e.item) -
        b.items_unique.begin());
  }
  return b;
}

TrainBatch sample_batch(const SplitDataset& split, std::size_t batch_size, std::size_t k_neg,
                        Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  const auto& train = split.train();
  if (train.empty()) throw std::invalid_argument("cannot sample from an empty train set");

  std::uniform_int_distribution<std::size_t> pick_edge(0, train.size() - 1);
  std::uniform_int_distribution<Index> pick_item(0, static_cast<Index>(split.num_items() - 1));
  std::vector<Edge> positives(batch_size);
  std::vector<Edge> negatives;
  negatives.reserve(batch_size * k_neg);
  for (auto& pos : positives) {
    pos = train[pick_edge(rng)];
    for (std::size_t j = 0; j < k_neg; ++j) {
      int attempts = 0;
      Index item = 0;
      do {
        if (++attempts > kNegativeRejectionCap) {
          throw SamplingError("no negative item found for user '" + split.users().raw(pos.user) +
                              "' (index " + std::to_string(pos.user) + ") after " +
                              std::to_string(kNegativeRejectionCap) + " attempts");
        }
        item = pick_item(rng);
      } while (split.in_train(pos.user, item));
      negatives.push_back({pos.user, item});
    }
  }
  return make_batch(std::move(positives), std::move(negatives), k_neg);
}

void write_edges(std::ostream& out, const std::vector<Edge>& edges, const IdMap& users,
                 const IdMap& items) {
  for (const auto& e : edges) out << users.raw(e.user) << '\t' << items.raw(e.item) << '\n';
}

void write_id_map(std::ostream& out, const IdMap& ids) {
  for (Index i = 0; i < ids.size(); ++i) out << ids.raw(i) << '\t' << i << '\n';
}

IdMap read_id_map(std::istream& in) {
  std::vector<std::pair<Index, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected 'raw_id<TAB>index'", line_no);
    try {
      std::size_t used = 0;
      auto idx = std::stoul(line.substr(tab + 1), &used);
      rows.emplace_back(static_cast<Index>(idx), line.substr(0, tab));
    } catch (const std::exception&) {
      throw ParseError("bad index in id map", line_no);
    }
  }
  std::sort(rows.begin(), rows.end());
  IdMap ids;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != k || ids.intern(rows[k].second) != k) {
      throw ParseError("id map is not a bijection onto 0.." + std::to_string(rows.size() - 1), 0);
    }
  }
  return ids;
}

std::vector<Edge> read_edges(std::istream& in, const IdMap& users, const IdMap& items) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    std::istringstream fields(line);
    std::string u, i;
    if (!(fields >> u >> i)) throw ParseError("expected '<user> <item>'", line_no);
    if (!users.contains(u) || !items.contains(i)) {
      throw ParseError("id not present in id map: '" + line + "'", line_no);
    }
    edges.push_back({users.index(u), items.index(i)});
  }
  return edges;
}

void save_split(const std::filesystem::path& dir, const SplitDataset& split) {
  std::filesystem::create_directories(dir);
  const std::pair<const char*, const std::vector<Edge>*> parts[] = {
      {"train.txt", &split.train()},
      {"val.txt", &split.validation()},
      {"test.txt", &split.test()},
      {"noise.txt", &split.noise()}};
  for (const auto& [name, edges] : parts) {
    auto out = open_for_write(dir / name);
    write_edges(out, *edges, split.users(), split.items());
  }
  auto users = open_for_write(dir / "users.tsv");
  write_id_map(users, split.users());
  auto items = open_for_write(dir / "items.tsv");
  write_id_map(items, split.items());
}

SplitDataset load_split(const std::filesystem::path& dir) {
  auto users_in = open_for_read(dir / "users.tsv");
  auto users = read_id_map(users_in);
  auto items_in = open_for_read(dir / "items.tsv");
  auto items = read_id_map(items_in);
  auto read_part = [&](const char* name) {
    auto in = open_for_read(dir / name);
    return read_edges(in, users, items);
  };
  std::vector<Edge> noise;
  if (std::filesystem::exists(dir / "noise.txt")) noise = read_part("noise.txt");
  auto train = read_part("train.txt");
  auto validation = read_part("val.txt");
  auto test = read_part("test.txt");
  return SplitDataset(std::move(users), std::move(items), std::move(train),
                      std::move(validation), std::move(test), std::move(noise));
}

}  // namespace qgrace::data
