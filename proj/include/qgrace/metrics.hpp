#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qgrace/dataset.hpp"
#include "qgrace/encoder.hpp"

namespace qgrace::eval {

/// Metrics are means of per-user values over evaluable users (at least one
/// test item and one train item). recall[j] / ndcg[j] belong to ks[j].
struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> recall;
  std::vector<double> ndcg;
  std::size_t num_users_evaluated = 0;
  std::size_t num_users_skipped = 0;

  double recall_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

inline const std::vector<std::size_t> kDefaultKs = {10, 20};

/// Every item not in `exclude` (sorted), by descending cosine score of
/// z.users[u] against z.items; ties go to the smaller item index.
std::vector<data::Index> rank_items(const encoder::Embeddings& z, data::Index u,
                                    std::span<const data::Index> exclude);

/// |top-K ∩ test| / |test|. `test_items` must be sorted and non-empty.
double recall_at_k(std::span<const data::Index> ranked, std::span<const data::Index> test_items,
                   std::size_t k);

/// Binary-relevance NDCG with 1/log2(rank + 1) discounts.
double ndcg_at_k(std::span<const data::Index> ranked, std::span<const data::Index> test_items,
                 std::size_t k);

/// Full-rank evaluation on the split's test edges. Throws when no user is
/// evaluable or when a ranked list contains a train item.
MetricsReport evaluate(const encoder::Embeddings& z, const data::SplitDataset& split,
                       std::vector<std::size_t> ks = kDefaultKs);
MetricsReport evaluate(const encoder::EmbeddingState& theta, const data::SplitDataset& split,
                       std::vector<std::size_t> ks = kDefaultKs);

/// Sorted test items per user.
std::vector<std::vector<data::Index>> test_items_by_user(const data::SplitDataset& split);

/// Header "method,metric,k,value,seed".
void write_metrics_header(std::ostream& out);
void write_metrics_rows(std::ostream& out, std::string_view method, const MetricsReport& report,
                        std::uint64_t seed);

}  // namespace qgrace::eval
