#include "qgrace/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qgrace/error.hpp"
#include "qgrace/kernels.hpp"

namespace qgrace::loss {

namespace {

using data::TrainBatch;
using encoder::Embeddings;

/// Unit vectors and norms of the batch's touched rows.
struct Geometry {
  Matrix user_unit;
  Matrix item_unit;
  std::vector<double> user_norm;
  std::vector<double> item_norm;
};

void normalize_into(std::span<const double> v, std::span<double> out, double& norm,
                    const char* kind, data::Index idx) {
  norm = std::sqrt(squared_norm(v));
  if (!(norm > kNormEpsilon)) {
    throw NumericError(std::string("degenerate embedding for ") + kind + " " +
                       std::to_string(idx) + " (norm " + std::to_string(norm) + ")");
  }
  for (std::size_t c = 0; c < v.size(); ++c) out[c] = v[c] / norm;
}

Geometry geometry(const TrainBatch& batch, const Embeddings& z) {
  const auto d = z.users.cols();
  if (z.items.cols() != d) throw std::invalid_argument("user/item embedding dims differ");
  Geometry g{Matrix(batch.users_unique.size(), d), Matrix(batch.items_unique.size(), d),
             std::vector<double>(batch.users_unique.size()),
             std::vector<double>(batch.items_unique.size())};
  for (std::size_t r = 0; r < batch.users_unique.size(); ++r) {
    const auto u = batch.users_unique[r];
    if (u >= z.users.rows()) throw std::invalid_argument("batch user out of range");
    normalize_into(z.users.row(u), g.user_unit.row(r), g.user_norm[r], "user", u);
  }
  for (std::size_t r = 0; r < batch.items_unique.size(); ++r) {
    const auto i = batch.items_unique[r];
    if (i >= z.items.rows()) throw std::invalid_argument("batch item out of range");
    normalize_into(z.items.row(i), g.item_unit.row(r), g.item_norm[r], "item", i);
  }
  return g;
}

/// Chain a gradient on x~ = x/|x| back to x: (g - (g.x~) x~) / |x|.
void project_row(std::span<double> g, std::span<const double> unit, double norm) {
  const double radial = dot(g, unit);
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = (g[c] - radial * unit[c]) / norm;
}

void project_rows(Matrix& g, const Matrix& unit, const std::vector<double>& norm) {
  for (std::size_t r = 0; r < g.rows(); ++r) project_row(g.row(r), unit.row(r), norm[r]);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double diff = a[c] - b[c];
    s += diff * diff;
  }
  return s;
}

double inv_positives(const TrainBatch& batch) {
  if (batch.num_positives() == 0) throw std::invalid_argument("batch has no positives");
  return 1.0 / static_cast<double>(batch.num_positives());
}

void check_weights(const TrainBatch& batch, const PairWeights& w) {
  if (w.values.size() != batch.num_pairs()) {
    throw std::invalid_argument("pair weights (" + std::to_string(w.values.size()) +
                                ") not aligned with batch pairs (" +
                                std::to_string(batch.num_pairs()) + ")");
  }
}

/// log mean over unordered distinct pairs of exp(-2 |x_a - x_b|^2); writes
/// the gradient w.r.t. the unit rows (scaled by `scale`) into `grad_unit`.
double uniformity_half(const Matrix& unit, Matrix* grad_unit, double scale) {
  const std::size_t n = unit.rows();
  if (n < 2) return 0.0;
  auto pot = kernels::parallel::pairwise_potential(unit);
  double twice_sum = 0.0;
  for (double p : pot.potential) twice_sum += p;
  const double sum = 0.5 * twice_sum;
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  if (grad_unit != nullptr) {
    const double coef = -4.0 * scale / sum;
    for (std::size_t a = 0; a < n; ++a) axpy(coef, pot.pull.row(a), grad_unit->row(a));
  }
  return std::log(sum / pairs);
}

/// Adds the weighted alignment gradient w.r.t. unit rows. `weights` null
/// means "positives only with weight 1" (the AU path).
void alignment_unit_grad(const TrainBatch& batch, const Geometry& geo, const double* weights,
                         Matrix& gu, Matrix& gi) {
  const double inv_b = inv_positives(batch);
  const std::size_t d = geo.user_unit.cols();
  const std::size_t pairs = weights != nullptr ? batch.num_pairs() : batch.num_positives();
  for (std::size_t p = 0; p < pairs; ++p) {
    const double w = weights != nullptr ? weights[p] : 1.0;
    if (w == 0.0) continue;
    const double c = 2.0 * (w * inv_b);
    auto xu = geo.user_unit.row(batch.user_slot[p]);
    auto xi = geo.item_unit.row(batch.item_slot[p]);
    auto ru = gu.row(batch.user_slot[p]);
    auto ri = gi.row(batch.item_slot[p]);
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = c * (xu[k] - xi[k]);
      ru[k] += diff;
      ri[k] -= diff;
    }
  }
}

double alignment_value(const TrainBatch& batch, const Geometry& geo, const double* weights) {
  const double inv_b = inv_positives(batch);
  const std::size_t pairs = weights != nullptr ? batch.num_pairs() : batch.num_positives();
  double sum = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const double w = weights != nullptr ? weights[p] : 1.0;
    if (w == 0.0) continue;
    sum += w * squared_distance(geo.user_unit.row(batch.user_slot[p]),
                                geo.item_unit.row(batch.item_slot[p]));
  }
  return sum * inv_b;
}

SparseGrad empty_grad(const TrainBatch& batch, std::size_t d) {
  return SparseGrad{batch.users_unique, Matrix(batch.users_unique.size(), d), batch.items_unique,
                    Matrix(batch.items_unique.size(), d)};
}

double uniformity_with_grad(const Geometry& geo, SparseGrad* g, double alpha) {
  // Each half enters with weight 1/2.
  const double scale = 0.5 * alpha;
  const double uu = uniformity_half(geo.user_unit, g ? &g->users : nullptr, scale);
  const double ui = uniformity_half(geo.item_unit, g ? &g->items : nullptr, scale);
  return 0.5 * (uu + ui);
}

SparseGrad alignment_uniformity_grad(const TrainBatch& batch, const Embeddings& z,
                                     const double* weights, double alpha, LossValue* value) {
  const auto geo = geometry(batch, z);
  auto g = empty_grad(batch, z.users.cols());
  alignment_unit_grad(batch, geo, weights, g.users, g.items);
  double unif = 0.0;
  if (alpha != 0.0 || value != nullptr) unif = uniformity_with_grad(geo, &g, alpha);
  if (value != nullptr) {
    value->alpha = alpha;
    value->alignment = alignment_value(batch, geo, weights);
    value->uniformity = unif;
    value->total = value->alignment + alpha * unif;
  }
  project_rows(g.users, geo.user_unit, geo.user_norm);
  project_rows(g.items, geo.item_unit, geo.item_norm);
  return g;
}

double log_sigmoid_neg(double x) {
  // -log sigmoid(x) = log(1 + e^{-x}), evaluated without overflow.
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_negatives(const TrainBatch& batch) {
  if (batch.k_neg == 0 || batch.negatives.empty()) {
    throw std::invalid_argument("BPR needs at least one negative per positive");
  }
}

}  // namespace

PairWeights weights_from_graph(const TrainBatch& batch, const data::SplitDataset& split) {
  PairWeights w{std::vector<double>(batch.num_pairs()), WeightSource::FromA};
  for (std::size_t p = 0; p < batch.num_pairs(); ++p) {
    const auto& e = batch.pair(p);
    w.values[p] = split.in_train(e.user, e.item) ? 1.0 : 0.0;
  }
  return w;
}

PairWeights weights_from_interest(std::span<const double> values) {
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("interest weight outside [0,1]");
  }
  return PairWeights{std::vector<double>(values.begin(), values.end()), WeightSource::FromR};
}

std::vector<double> l2_normalize(std::span<const double> v) {
  std::vector<double> out(v.size());
  double norm = 0.0;
  normalize_into(v, out, norm, "vector", 0);
  return out;
}

double alignment_term(const TrainBatch& batch, const PairWeights& weights, const Embeddings& z) {
  check_weights(batch, weights);
  return alignment_value(batch, geometry(batch, z), weights.values.data());
}

double uniformity_term(const TrainBatch& batch, const Embeddings& z) {
  return uniformity_with_grad(geometry(batch, z), nullptr, 1.0);
}

LossValue wau_loss(const TrainBatch& batch, const PairWeights& weights, const Embeddings& z,
                   double alpha) {
  check_weights(batch, weights);
  const auto geo = geometry(batch, z);
  LossValue v;
  v.alpha = alpha;
  v.alignment = alignment_value(batch, geo, weights.values.data());
  v.uniformity = uniformity_with_grad(geo, nullptr, 1.0);
  v.total = v.alignment + alpha * v.uniformity;
  return v;
}

LossValue au_loss(const TrainBatch& batch, const Embeddings& z, double alpha) {
  const auto geo = geometry(batch, z);
  LossValue v;
  v.alpha = alpha;
  v.alignment = alignment_value(batch, geo, nullptr);
  v.uniformity = uniformity_with_grad(geo, nullptr, 1.0);
  v.total = v.alignment + alpha * v.uniformity;
  return v;
}

SparseGrad wau_grad(const TrainBatch& batch, const PairWeights& weights, const Embeddings& z,
                    double alpha, LossValue* value) {
  check_weights(batch, weights);
  return alignment_uniformity_grad(batch, z, weights.values.data(), alpha, value);
}

SparseGrad au_grad(const TrainBatch& batch, const Embeddings& z, double alpha) {
  return alignment_uniformity_grad(batch, z, nullptr, alpha, nullptr);
}

SparseGrad uniformity_grad(const TrainBatch& batch, const Embeddings& z, double alpha,
                           double* value) {
  const auto geo = geometry(batch, z);
  auto g = empty_grad(batch, z.users.cols());
  const double unif = uniformity_with_grad(geo, &g, alpha);
  if (value != nullptr) *value = unif;
  project_rows(g.users, geo.user_unit, geo.user_norm);
  project_rows(g.items, geo.item_unit, geo.item_norm);
  return g;
}

PairGrads pair_distance_grads(const TrainBatch& batch, const Embeddings& z) {
  const auto geo = geometry(batch, z);
  const double inv_b = inv_positives(batch);
  const std::size_t d = z.users.cols();
  const std::size_t pairs = batch.num_pairs();
  PairGrads out{Matrix(pairs, d), Matrix(pairs, d), std::vector<double>(pairs)};
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto us = batch.user_slot[p];
    const auto is = batch.item_slot[p];
    auto xu = geo.user_unit.row(us);
    auto xi = geo.item_unit.row(is);
    out.sq_dist[p] = squared_distance(xu, xi);
    auto gu = out.user_part.row(p);
    auto gi = out.item_part.row(p);
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = 2.0 * inv_b * (xu[k] - xi[k]);
      gu[k] = diff;
      gi[k] = -diff;
    }
    project_row(gu, xu, geo.user_norm[us]);
    project_row(gi, xi, geo.item_norm[is]);
  }
  return out;
}

double alignment_from_pairs(const TrainBatch& batch, const PairGrads& grads,
                            std::span<const double> weights) {
  if (weights.size() != grads.sq_dist.size()) {
    throw std::invalid_argument("alignment_from_pairs: misaligned inputs");
  }
  double sum = 0.0;
  for (std::size_t p = 0; p < weights.size(); ++p) {
    if (weights[p] == 0.0) continue;
    sum += weights[p] * grads.sq_dist[p];
  }
  return sum * inv_positives(batch);
}

SparseGrad combine_pair_grads(const TrainBatch& batch, const PairGrads& grads,
                              std::span<const double> weights) {
  if (weights.size() != batch.num_pairs() || grads.user_part.rows() != batch.num_pairs()) {
    throw std::invalid_argument("combine_pair_grads: misaligned inputs");
  }
  auto g = empty_grad(batch, grads.user_part.cols());
  for (std::size_t p = 0; p < batch.num_pairs(); ++p) {
    if (weights[p] == 0.0) continue;
    axpy(weights[p], grads.user_part.row(p), g.users.row(batch.user_slot[p]));
    axpy(weights[p], grads.item_part.row(p), g.items.row(batch.item_slot[p]));
  }
  return g;
}

void accumulate(SparseGrad& a, const SparseGrad& b, double scale) {
  if (a.user_rows != b.user_rows || a.item_rows != b.item_rows) {
    throw std::invalid_argument("accumulate: gradients cover different rows");
  }
  axpy(scale, b.users.flat(), a.users.flat());
  axpy(scale, b.items.flat(), a.items.flat());
}

double bpr_loss(const TrainBatch& batch, const Embeddings& z) {
  require_negatives(batch);
  const auto geo = geometry(batch, z);
  const std::size_t B = batch.num_positives();
  double sum = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    auto xu = geo.user_unit.row(batch.user_slot[b]);
    const double pos = dot(xu, geo.item_unit.row(batch.item_slot[b]));
    for (std::size_t j = 0; j < batch.k_neg; ++j) {
      const std::size_t p = B + b * batch.k_neg + j;
      const double neg = dot(xu, geo.item_unit.row(batch.item_slot[p]));
      sum += log_sigmoid_neg(pos - neg);
    }
  }
  return sum / static_cast<double>(B * batch.k_neg);
}

SparseGrad bpr_grad(const TrainBatch& batch, const Embeddings& z, double* value) {
  require_negatives(batch);
  const auto geo = geometry(batch, z);
  auto g = empty_grad(batch, z.users.cols());
  const std::size_t B = batch.num_positives();
  const double inv = 1.0 / static_cast<double>(B * batch.k_neg);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const auto us = batch.user_slot[b];
    const auto ps = batch.item_slot[b];
    auto xu = geo.user_unit.row(us);
    auto xp = geo.item_unit.row(ps);
    const double pos = dot(xu, xp);
    for (std::size_t j = 0; j < batch.k_neg; ++j) {
      const auto ns = batch.item_slot[B + b * batch.k_neg + j];
      auto xn = geo.item_unit.row(ns);
      const double gap = pos - dot(xu, xn);
      loss_sum += log_sigmoid_neg(gap);
      // d/dx of -log sigmoid(x) is -sigmoid(-x).
      const double c = -sigmoid(-gap) * inv;
      auto gu = g.users.row(us);
      for (std::size_t k = 0; k < gu.size(); ++k) gu[k] += c * (xp[k] - xn[k]);
      axpy(c, xu, g.items.row(ps));
      axpy(-c, xu, g.items.row(ns));
    }
  }
  if (value != nullptr) *value = loss_sum * inv;
  project_rows(g.users, geo.user_unit, geo.user_norm);
  project_rows(g.items, geo.item_unit, geo.item_norm);
  return g;
}

}  // namespace qgrace::loss
