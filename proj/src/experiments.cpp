#include "qgrace/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>

#include "qgrace/random.hpp"

namespace qgrace::exp {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

gen::GenerativeParams deterministic_copy(const gen::GenerativeParams& phi) {
  auto out = phi;
  out.deterministic = true;
  return out;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::Normal ? "normal" : "qgrace"; }

Method parse_method(std::string_view text) {
  const auto t = lower(text);
  if (t == "normal") return Method::Normal;
  if (t == "qgrace") return Method::QGrace;
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

RunResult train_and_evaluate(Method method, const matcher::TrainConfig& train,
                             const data::SplitDataset& split,
                             const std::vector<std::size_t>& ks) {
  RunResult out;
  out.method = method;
  if (method == Method::Normal) {
    auto r = matcher::normal_train(train, split);
    out.theta = std::move(r.theta);
    out.log = std::move(r.log);
  } else {
    auto r = matcher::qgrace_train(train, split);
    out.theta = std::move(r.theta);
    out.phi = std::move(r.phi);
    out.log = std::move(r.log);
  }
  out.report = eval::evaluate(out.theta, split, ks);
  return out;
}

encoder::Embeddings generator_input(const matcher::TrainConfig& train,
                                    const encoder::EmbeddingState& theta,
                                    const data::SplitDataset& split) {
  if (train.gen_input == matcher::GenInput::Base || theta.kind == encoder::EncoderKind::GMF) {
    return theta.tables;
  }
  const auto adj = encoder::normalize_adjacency(split);
  return encoder::encoder_forward(theta, &adj);
}

std::vector<double> interest_weights(const gen::GenerativeParams& phi,
                                     const encoder::Embeddings& z,
                                     std::span<const data::Edge> pairs) {
  if (pairs.empty()) return {};
  return gen::gen_forward_pairs(deterministic_copy(phi), pairs, z, nullptr).values;
}

InterestGap interest_gap(const gen::GenerativeParams& phi, const encoder::Embeddings& z,
                         const data::SplitDataset& split) {
  std::vector<data::Edge> clean;
  for (const auto& e : split.train()) {
    if (!split.is_noise(e.user, e.item)) clean.push_back(e);
  }
  if (clean.empty() || split.noise().empty()) {
    throw std::invalid_argument("interest_gap: needs both clean and injected train edges");
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return {mean(interest_weights(phi, z, clean)), mean(interest_weights(phi, z, split.noise()))};
}

double relative_drop(double base, double value) {
  return base == 0.0 ? 0.0 : (base - value) / base;
}

std::vector<NoiseRow> noise_sweep(const config::RunConfig& cfg, const data::SplitDataset& clean,
                                  const std::vector<double>& ratios) {
  const Method methods[] = {Method::Normal, Method::QGrace};
  const auto seed = cfg.train.seed;
  eval::MetricsReport base[2];
  for (int m = 0; m < 2; ++m) base[m] = train_and_evaluate(methods[m], cfg.train, clean, cfg.ks).report;

  std::vector<NoiseRow> rows;
  for (const double ratio : ratios) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("noise ratio must be >= 0");
    data::SplitDataset noisy;
    if (ratio > 0.0) {
      auto rng = make_stream(seed, streams::kNoise);
      noisy = data::inject_noise(clean, ratio, rng);
    }
    const auto& split = ratio > 0.0 ? noisy : clean;
    for (int m = 0; m < 2; ++m) {
      NoiseRow row;
      row.ratio = ratio;
      row.method = methods[m];
      row.report = ratio > 0.0 ? train_and_evaluate(methods[m], cfg.train, split, cfg.ks).report
                               : base[m];
      for (std::size_t q = 0; q < cfg.ks.size(); ++q) {
        row.recall_drop.push_back(relative_drop(base[m].recall[q], row.report.recall[q]));
        row.ndcg_drop.push_back(relative_drop(base[m].ndcg[q], row.report.ndcg[q]));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<AlphaRow> alpha_sweep(const config::RunConfig& cfg, const data::SplitDataset& split,
                                  const std::vector<double>& alphas) {
  std::vector<AlphaRow> rows;
  for (const double alpha : alphas) {
    auto train = cfg.train;
    train.alpha = alpha;
    rows.push_back({alpha, train_and_evaluate(Method::QGrace, train, split, cfg.ks).report});
  }
  return rows;
}

std::vector<InterestRow> dump_interests(const gen::GenerativeParams& phi,
                                        const encoder::Embeddings& z,
                                        const std::vector<data::Index>& users,
                                        const std::vector<data::Index>& items) {
  const auto num_users = phi.variant == gen::Variant::MF ? phi.dims.num_users : z.users.rows();
  const auto num_items = phi.variant == gen::Variant::MF ? phi.dims.num_items : z.items.rows();
  for (const auto u : users) {
    if (u >= num_users) throw std::out_of_range("dump_interests: user " + std::to_string(u) + " out of range");
  }
  for (const auto i : items) {
    if (i >= num_items) throw std::out_of_range("dump_interests: item " + std::to_string(i) + " out of range");
  }
  std::vector<data::Edge> pairs;
  pairs.reserve(users.size() * items.size());
  for (const auto u : users) {
    for (const auto i : items) pairs.push_back({u, i});
  }
  const auto weights = interest_weights(phi, z, pairs);
  std::vector<InterestRow> rows(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) rows[p] = {pairs[p].user, pairs[p].item, weights[p]};
  return rows;
}

std::vector<data::Index> choose_subset(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<data::Index> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<data::Index>(i);
  if (count >= n) return all;
  std::vector<data::Index> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

void write_noise_csv(std::ostream& out, const std::vector<NoiseRow>& rows, std::uint64_t seed,
                     bool header) {
  if (header) out << "ratio,method,metric,k,value,relative_drop,seed\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : rows) {
    for (std::size_t q = 0; q < r.report.ks.size(); ++q) {
      out << r.ratio << ',' << to_string(r.method) << ",recall," << r.report.ks[q] << ','
          << r.report.recall[q] << ',' << r.recall_drop[q] << ',' << seed << '\n';
      out << r.ratio << ',' << to_string(r.method) << ",ndcg," << r.report.ks[q] << ','
          << r.report.ndcg[q] << ',' << r.ndcg_drop[q] << ',' << seed << '\n';
    }
  }
  out.precision(old_precision);
}

void write_alpha_csv(std::ostream& out, const std::vector<AlphaRow>& rows, std::uint64_t seed,
                     bool header) {
  if (header) out << "alpha,method,metric,k,value,seed\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : rows) {
    for (std::size_t q = 0; q < r.report.ks.size(); ++q) {
      out << r.alpha << ",qgrace,recall," << r.report.ks[q] << ',' << r.report.recall[q] << ','
          << seed << '\n';
      out << r.alpha << ",qgrace,ndcg," << r.report.ks[q] << ',' << r.report.ndcg[q] << ','
          << seed << '\n';
    }
  }
  out.precision(old_precision);
}

void write_interest_csv(std::ostream& out, const std::vector<InterestRow>& rows) {
  out << "user_index,item_index,weight\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : rows) out << r.user << ',' << r.item << ',' << r.weight << '\n';
  out.precision(old_precision);
}

}  // namespace qgrace::exp
