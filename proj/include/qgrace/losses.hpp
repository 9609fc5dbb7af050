#pragma once

// Alignment/uniformity objectives on l2-normalized embeddings.
//
// Expectations are estimated per batch:
//  * alignment   = (1/B) * sum over every batch pair p of W_p |z~_u - z~_i|^2,
//    B = number of positives. Each positive together with its k negatives is
//    one training instance, so 0/1 weights reduce this exactly to the mean
//    over positives (plain AU alignment).
//  * uniformity  = (log mean_{u<u'} e^{-2|z~_u - z~_u'|^2}
//                 + log mean_{i<i'} e^{-2|z~_i - z~_i'|^2}) / 2
//    over unordered distinct pairs of the batch's unique users / items; a half
//    with fewer than two members contributes 0.

#include <cstddef>
#include <span>
#include <vector>

#include "qgrace/dataset.hpp"
#include "qgrace/encoder.hpp"
#include "qgrace/matrix.hpp"

namespace qgrace::loss {

inline constexpr double kNormEpsilon = 1e-12;

enum class WeightSource { FromA, FromR };

/// One weight per batch pair (positives first, then negatives).
struct PairWeights {
  std::vector<double> values;
  WeightSource source = WeightSource::FromA;
};

/// 1 for pairs that are train edges, 0 otherwise.
PairWeights weights_from_graph(const data::TrainBatch& batch, const data::SplitDataset& split);
/// Interest values; each must lie in [0,1].
PairWeights weights_from_interest(std::span<const double> values);

struct LossValue {
  double total = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
  double alpha = 0.0;
};

/// v / |v|; throws NumericError when |v| <= kNormEpsilon.
std::vector<double> l2_normalize(std::span<const double> v);

double alignment_term(const data::TrainBatch& batch, const PairWeights& weights,
                      const encoder::Embeddings& z);
double uniformity_term(const data::TrainBatch& batch, const encoder::Embeddings& z);
LossValue wau_loss(const data::TrainBatch& batch, const PairWeights& weights,
                   const encoder::Embeddings& z, double alpha);

/// Unweighted AU loss: alignment over the positive pairs only.
LossValue au_loss(const data::TrainBatch& batch, const encoder::Embeddings& z, double alpha);

/// Gradient restricted to the batch's touched rows. `users` row r belongs to
/// batch.users_unique[r], `items` row r to batch.items_unique[r].
struct SparseGrad {
  std::vector<data::Index> user_rows;
  Matrix users;
  std::vector<data::Index> item_rows;
  Matrix items;
};

/// `value`, when given, receives the loss evaluated on the same pass.
SparseGrad wau_grad(const data::TrainBatch& batch, const PairWeights& weights,
                    const encoder::Embeddings& z, double alpha, LossValue* value = nullptr);
SparseGrad au_grad(const data::TrainBatch& batch, const encoder::Embeddings& z, double alpha);
/// alpha * gradient of the uniformity term alone; `value` gets the
/// (unscaled) uniformity term.
SparseGrad uniformity_grad(const data::TrainBatch& batch, const encoder::Embeddings& z,
                           double alpha, double* value = nullptr);

/// g_p = grad_Z |z~_u - z~_i|^2 / B for every pair p; row p of `user_part`
/// is the gradient on z_u and row p of `item_part` the gradient on z_i.
/// Alignment gradient = sum_p W_p g_p.
struct PairGrads {
  Matrix user_part;
  Matrix item_part;
  std::vector<double> sq_dist;  // |z~_u - z~_i|^2 per pair
};

/// (1/B) sum_p W_p sq_dist_p, i.e. the alignment term from cached distances.
double alignment_from_pairs(const data::TrainBatch& batch, const PairGrads& grads,
                            std::span<const double> weights);

PairGrads pair_distance_grads(const data::TrainBatch& batch, const encoder::Embeddings& z);

/// sum_p W_p g_p scattered into touched rows.
SparseGrad combine_pair_grads(const data::TrainBatch& batch, const PairGrads& grads,
                              std::span<const double> weights);

/// a += scale * b; both must cover the same rows.
void accumulate(SparseGrad& a, const SparseGrad& b, double scale = 1.0);

/// Mean over (u, i+, i-) triples of -log sigmoid(z~_u.z~_i+ - z~_u.z~_i-).
double bpr_loss(const data::TrainBatch& batch, const encoder::Embeddings& z);
SparseGrad bpr_grad(const data::TrainBatch& batch, const encoder::Embeddings& z,
                    double* value = nullptr);

}  // namespace qgrace::loss
