#include "qgrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "qgrace/error.hpp"
#include "qgrace/kernels.hpp"
#include "qgrace/losses.hpp"

namespace qgrace::eval {

namespace {

Matrix unit_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double norm = std::sqrt(squared_norm(m.row(r)));
    if (norm < loss::kNormEpsilon) {
      throw NumericError("cannot score: embedding row " + std::to_string(r) + " has zero norm");
    }
    auto src = m.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) dst[c] = src[c] / norm;
  }
  return out;
}

std::size_t index_of(const std::vector<std::size_t>& ks, std::size_t k) {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) throw std::out_of_range("K=" + std::to_string(k) + " not in report");
  return static_cast<std::size_t>(it - ks.begin());
}

std::size_t hits_before(std::span<const data::Index> ranked, std::span<const data::Index> test,
                        std::size_t k, double* dcg) {
  std::size_t hits = 0;
  const auto n = std::min(k, ranked.size());
  for (std::size_t r = 0; r < n; ++r) {
    if (std::binary_search(test.begin(), test.end(), ranked[r])) {
      ++hits;
      if (dcg) *dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  return hits;
}

}  // namespace

double MetricsReport::recall_at(std::size_t k) const { return recall[index_of(ks, k)]; }
double MetricsReport::ndcg_at(std::size_t k) const { return ndcg[index_of(ks, k)]; }

std::vector<data::Index> rank_items(const encoder::Embeddings& z, data::Index u,
                                    std::span<const data::Index> exclude) {
  const auto users = unit_rows(z.users);
  const auto items = unit_rows(z.items);
  const auto n = z.items.rows();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = dot(users.row(u), items.row(i));
  std::vector<data::Index> order;
  order.reserve(n);
  for (data::Index i = 0; i < n; ++i) {
    if (!std::binary_search(exclude.begin(), exclude.end(), i)) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](data::Index a, data::Index b) {
    return score[a] != score[b] ? score[a] > score[b] : a < b;
  });
  return order;
}

double recall_at_k(std::span<const data::Index> ranked, std::span<const data::Index> test_items,
                   std::size_t k) {
  if (test_items.empty()) throw std::invalid_argument("recall_at_k: empty test set");
  return static_cast<double>(hits_before(ranked, test_items, k, nullptr)) /
         static_cast<double>(test_items.size());
}

double ndcg_at_k(std::span<const data::Index> ranked, std::span<const data::Index> test_items,
                 std::size_t k) {
  if (test_items.empty()) throw std::invalid_argument("ndcg_at_k: empty test set");
  double dcg = 0.0;
  hits_before(ranked, test_items, k, &dcg);
  double idcg = 0.0;
  const auto ideal = std::min(k, test_items.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

std::vector<std::vector<data::Index>> test_items_by_user(const data::SplitDataset& split) {
  std::vector<std::vector<data::Index>> out(split.num_users());
  for (const auto& e : split.test()) out[e.user].push_back(e.item);
  for (auto& items : out) std::sort(items.begin(), items.end());
  return out;
}

MetricsReport evaluate(const encoder::Embeddings& z, const data::SplitDataset& split,
                       std::vector<std::size_t> ks) {
  if (ks.empty()) throw std::invalid_argument("evaluate: no K given");
  if (std::any_of(ks.begin(), ks.end(), [](std::size_t k) { return k == 0; })) {
    throw std::invalid_argument("evaluate: K must be >= 1");
  }
  if (z.users.rows() != split.num_users() || z.items.rows() != split.num_items()) {
    throw std::invalid_argument("evaluate: embeddings do not match the split");
  }
  const auto test = test_items_by_user(split);
  std::vector<data::Index> users;
  std::vector<std::vector<data::Index>> exclude(split.num_users());
  MetricsReport report;
  for (data::Index u = 0; u < split.num_users(); ++u) {
    if (test[u].empty()) continue;
    if (split.train_items(u).empty()) {
      ++report.num_users_skipped;
      continue;
    }
    users.push_back(u);
    exclude[u] = split.train_items(u);
  }
  if (users.empty()) throw Error("evaluate: no user has both train and test items");

  const auto max_k = *std::max_element(ks.begin(), ks.end());
  const auto top = kernels::parallel::top_k(unit_rows(z.users), unit_rows(z.items), users,
                                            exclude, max_k);
  report.ks = ks;
  report.recall.assign(ks.size(), 0.0);
  report.ndcg.assign(ks.size(), 0.0);
  for (std::size_t j = 0; j < users.size(); ++j) {
    const auto& train = exclude[users[j]];
    for (const auto item : top[j]) {
      if (std::binary_search(train.begin(), train.end(), item)) {
        throw Error("evaluate: train item ranked for user " + std::to_string(users[j]));
      }
    }
    for (std::size_t q = 0; q < ks.size(); ++q) {
      report.recall[q] += recall_at_k(top[j], test[users[j]], ks[q]);
      report.ndcg[q] += ndcg_at_k(top[j], test[users[j]], ks[q]);
    }
  }
  report.num_users_evaluated = users.size();
  const double inv = 1.0 / static_cast<double>(users.size());
  for (auto& v : report.recall) v *= inv;
  for (auto& v : report.ndcg) v *= inv;
  return report;
}

MetricsReport evaluate(const encoder::EmbeddingState& theta, const data::SplitDataset& split,
                       std::vector<std::size_t> ks) {
  std::unique_ptr<encoder::NormalizedAdjacency> adj;
  if (theta.kind == encoder::EncoderKind::LightGCN) {
    adj = std::make_unique<encoder::NormalizedAdjacency>(encoder::normalize_adjacency(split));
  }
  return evaluate(encoder::encoder_forward(theta, adj.get()), split, std::move(ks));
}

void write_metrics_header(std::ostream& out) { out << "method,metric,k,value,seed\n"; }

void write_metrics_rows(std::ostream& out, std::string_view method, const MetricsReport& report,
                        std::uint64_t seed) {
  const auto old_precision = out.precision(17);
  for (std::size_t q = 0; q < report.ks.size(); ++q) {
    out << method << ",recall," << report.ks[q] << ',' << report.recall[q] << ',' << seed << '\n';
    out << method << ",ndcg," << report.ks[q] << ',' << report.ndcg[q] << ',' << seed << '\n';
  }
  out.precision(old_precision);
}

}  // namespace qgrace::eval
