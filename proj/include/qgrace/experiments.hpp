#pragma once

// Harnesses that train, evaluate and tabulate: single runs, noise and alpha
// sweeps, and interest-weight dumps.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "qgrace/config.hpp"
#include "qgrace/dataset.hpp"
#include "qgrace/encoder.hpp"
#include "qgrace/generator.hpp"
#include "qgrace/matcher.hpp"
#include "qgrace/metrics.hpp"

namespace qgrace::exp {

enum class Method { Normal, QGrace };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct RunResult {
  Method method = Method::Normal;
  encoder::EmbeddingState theta;
  std::optional<gen::GenerativeParams> phi;  // QGrace only
  matcher::TrainLog log;
  eval::MetricsReport report;
};

/// Train with `method` and evaluate on the split's test edges.
RunResult train_and_evaluate(Method method, const matcher::TrainConfig& train,
                             const data::SplitDataset& split,
                             const std::vector<std::size_t>& ks);

/// The embeddings the generator reads for `theta` (propagated or base tables).
encoder::Embeddings generator_input(const matcher::TrainConfig& train,
                                    const encoder::EmbeddingState& theta,
                                    const data::SplitDataset& split);

/// Deterministic generator weights for explicit pairs.
std::vector<double> interest_weights(const gen::GenerativeParams& phi,
                                     const encoder::Embeddings& z,
                                     std::span<const data::Edge> pairs);

/// Mean deterministic R on clean train edges and on injected noise edges.
struct InterestGap {
  double mean_clean = 0.0;
  double mean_noise = 0.0;
  double gap() const { return mean_clean - mean_noise; }
};
InterestGap interest_gap(const gen::GenerativeParams& phi, const encoder::Embeddings& z,
                         const data::SplitDataset& split);

/// (base - value) / base; 0 when base is 0.
double relative_drop(double base, double value);

struct NoiseRow {
  double ratio = 0.0;
  Method method = Method::Normal;
  eval::MetricsReport report;
  std::vector<double> recall_drop;  // per K, relative to ratio 0
  std::vector<double> ndcg_drop;
};

/// For every ratio: inject noise into `clean` (test set untouched), run both
/// methods and compare against the same methods at ratio 0. Rows are
/// ratio-major, normal before qgrace.
std::vector<NoiseRow> noise_sweep(const config::RunConfig& cfg, const data::SplitDataset& clean,
                                  const std::vector<double>& ratios);

struct AlphaRow {
  double alpha = 0.0;
  eval::MetricsReport report;
};

/// QGrace trained and evaluated once per alpha.
std::vector<AlphaRow> alpha_sweep(const config::RunConfig& cfg, const data::SplitDataset& split,
                                  const std::vector<double>& alphas);

struct InterestRow {
  data::Index user = 0;
  data::Index item = 0;
  double weight = 0.0;
};

/// Cross product of the subsets, weights in deterministic mode.
std::vector<InterestRow> dump_interests(const gen::GenerativeParams& phi,
                                        const encoder::Embeddings& z,
                                        const std::vector<data::Index>& users,
                                        const std::vector<data::Index>& items);

/// `count` distinct indices below `n` (all of them when count >= n), sorted.
std::vector<data::Index> choose_subset(std::size_t n, std::size_t count, Rng& rng);

void write_noise_csv(std::ostream& out, const std::vector<NoiseRow>& rows, std::uint64_t seed,
                     bool header = true);
void write_alpha_csv(std::ostream& out, const std::vector<AlphaRow>& rows, std::uint64_t seed,
                     bool header = true);
void write_interest_csv(std::ostream& out, const std::vector<InterestRow>& rows);

}  // namespace qgrace::exp
