#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "qgrace/random.hpp"

namespace qgrace::data {

using Index = std::uint32_t;

struct Edge {
  Index user = 0;
  Index item = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::uint64_t edge_key(Index u, Index i) { return (std::uint64_t{u} << 32) | i; }
inline std::uint64_t edge_key(const Edge& e) { return edge_key(e.user, e.item); }

/// Bidirectional raw-identifier <-> contiguous-index table.
class IdMap {
 public:
  /// Index of `raw`, assigning the next free index on first sight.
  Index intern(const std::string& raw);
  const std::string& raw(Index idx) const { return raws_.at(idx); }
  /// Throws std::out_of_range for unknown ids.
  Index index(const std::string& raw) const { return index_.at(raw); }
  bool contains(const std::string& raw) const { return index_.contains(raw); }
  std::size_t size() const { return raws_.size(); }
  const std::vector<std::string>& raws() const { return raws_; }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.raws_ == b.raws_; }

 private:
  std::vector<std::string> raws_;
  std::unordered_map<std::string, Index> index_;
};

/// The unweighted interaction graph A with contiguous ids.
struct InteractionDataset {
  IdMap users;
  IdMap items;
  std::vector<Edge> edges;  // unique, in first-appearance order

  std::size_t num_users() const { return users.size(); }
  std::size_t num_items() const { return items.size(); }

  friend bool operator==(const InteractionDataset&, const InteractionDataset&) = default;
};

/// Lines of "raw_user raw_item [ignored...]"; '#' lines and blank lines skipped.
/// Throws ParseError on malformed lines or when no interaction is found.
InteractionDataset parse_interactions(std::istream& in);
InteractionDataset load_interactions(const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

/// Partition sizes for `n` edges: floor for train and validation, remainder to test.
struct SplitSizes {
  std::size_t train, validation, test;
};
SplitSizes split_sizes(std::size_t n, const SplitRatios& ratios);

class SplitDataset {
 public:
  SplitDataset() = default;
  SplitDataset(IdMap users, IdMap items, std::vector<Edge> train, std::vector<Edge> validation,
               std::vector<Edge> test, std::vector<Edge> noise = {});

  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }
  const IdMap& users() const { return users_; }
  const IdMap& items() const { return items_; }

  const std::vector<Edge>& train() const { return train_; }
  const std::vector<Edge>& validation() const { return validation_; }
  const std::vector<Edge>& test() const { return test_; }
  /// Injected edges; every one of them is also in train().
  const std::vector<Edge>& noise() const { return noise_; }

  /// Sorted train items of user u.
  const std::vector<Index>& train_items(Index u) const { return train_items_[u]; }
  bool in_train(Index u, Index i) const;
  bool is_noise(Index u, Index i) const { return noise_keys_.contains(edge_key(u, i)); }
  /// Users that ended up with no train edge; excluded from evaluation.
  const std::vector<Index>& users_without_train() const { return users_without_train_; }

  friend bool operator==(const SplitDataset& a, const SplitDataset& b) {
    return a.users_ == b.users_ && a.items_ == b.items_ && a.train_ == b.train_ &&
           a.validation_ == b.validation_ && a.test_ == b.test_ && a.noise_ == b.noise_;
  }

 private:
  IdMap users_;
  IdMap items_;
  std::vector<Edge> train_, validation_, test_, noise_;
  std::vector<std::vector<Index>> train_items_;
  std::unordered_set<std::uint64_t> noise_keys_;
  std::vector<Index> users_without_train_;
};

/// Seeded global shuffle of the edge list followed by a ratio partition.
SplitDataset split_dataset(const InteractionDataset& ds, const SplitRatios& ratios,
                           std::uint64_t seed);

/// Adds floor(ratio * |train|) uniformly random pairs that are absent from
/// train, validation and test. Validation and test are left untouched.
SplitDataset inject_noise(const SplitDataset& split, double ratio, Rng& rng);

/// Positives followed by negatives, `k_neg` negatives per positive laid out
/// positive-major (negatives[b * k_neg + j] belongs to positives[b]).
struct TrainBatch {
  std::vector<Edge> positives;
  std::vector<Edge> negatives;
  std::size_t k_neg = 0;
  std::vector<Index> users_unique;  // sorted
  std::vector<Index> items_unique;  // sorted
  // Slot of each pair's user/item inside users_unique/items_unique.
  std::vector<std::uint32_t> user_slot;
  std::vector<std::uint32_t> item_slot;

  std::size_t num_positives() const { return positives.size(); }
  std::size_t num_pairs() const { return positives.size() + negatives.size(); }
  const Edge& pair(std::size_t p) const {
    return p < positives.size() ? positives[p] : negatives[p - positives.size()];
  }
};

/// Assemble a batch (unique lists and slots) from explicit pairs.
TrainBatch make_batch(std::vector<Edge> positives, std::vector<Edge> negatives,
                      std::size_t k_neg);

inline constexpr int kNegativeRejectionCap = 1000;

TrainBatch sample_batch(const SplitDataset& split, std::size_t batch_size, std::size_t k_neg,
                        Rng& rng);

// ---- file formats -------------------------------------------------------

void write_edges(std::ostream& out, const std::vector<Edge>& edges, const IdMap& users,
                 const IdMap& items);
void write_id_map(std::ostream& out, const IdMap& ids);
/// Reads "raw_id<TAB>index" lines; indices must form 0..n-1.
IdMap read_id_map(std::istream& in);
/// Edge file whose raw ids are resolved through existing maps.
std::vector<Edge> read_edges(std::istream& in, const IdMap& users, const IdMap& items);

/// Writes train.txt, val.txt, test.txt, users.tsv, items.tsv and noise.txt.
void save_split(const std::filesystem::path& dir, const SplitDataset& split);
SplitDataset load_split(const std::filesystem::path& dir);

}  // namespace qgrace::data
