#pragma once

// Gradient matching between a model trained on the interaction graph A and
// the same model trained on the generated interest graph R.
//
// Per iteration both branches see the same batch. Because the weighted
// alignment is linear in the pair weights, the R-branch gradient is
//   G_R = P( sum_p R_p g_p + alpha * grad_uniformity ),
// where g_p are the per-pair distance gradients and P is the (symmetric)
// propagation adjoint (identity for GMF). The derivative of the matching
// distance D(G_A, G_R) w.r.t. R_p is therefore <P dD/dG_R, g_p>, and the
// generator gradient is one gen_backward with that upstream.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qgrace/dataset.hpp"
#include "qgrace/encoder.hpp"
#include "qgrace/generator.hpp"
#include "qgrace/losses.hpp"

namespace qgrace::matcher {

inline constexpr double kColumnSkipNorm = 1e-12;

/// Gradient of one parameter matrix restricted to `rows`.
struct BundleLayer {
  std::string label;
  std::vector<data::Index> rows;  // sorted, unique
  Matrix grad;                    // rows.size() x d
};

/// One layer per embedding table ("user_table", "item_table").
struct GradientBundle {
  std::vector<BundleLayer> layers;
};

/// Bundles are compatible when labels, row lists and shapes agree.
bool same_layout(const GradientBundle& a, const GradientBundle& b);

enum class Trajectory { Single, Dual };
enum class LossKind { WAU, BPR };
enum class GenInput { Propagated, Base };

std::string_view to_string(Trajectory t);
std::string_view to_string(LossKind l);
std::string_view to_string(GenInput g);
Trajectory parse_trajectory(std::string_view text);
LossKind parse_loss(std::string_view text);
GenInput parse_gen_input(std::string_view text);

struct TrainConfig {
  double alpha = 1.0;
  double lr = 0.001;        // eta, inner plain gradient descent
  double outer_lr = 0.001;  // Adam step size for the generator
  std::size_t iter_in = 1;
  std::size_t iter_out = 1;
  /// When > 0, overrides iter_out so that iter_out * iter_in covers this
  /// many epochs of ceil(|train| / batch_size) batches.
  std::size_t epochs = 0;
  std::size_t batch_size = 128;
  std::size_t k_neg = 1;
  std::size_t dim = 64;
  int layers = 2;
  encoder::EncoderKind encoder = encoder::EncoderKind::GMF;
  gen::Variant generator = gen::Variant::VAE;
  std::uint64_t seed = 0;
  Trajectory trajectory = Trajectory::Single;
  LossKind loss = LossKind::WAU;  // normal training only
  std::size_t gen_dim = 0;        // 0 -> d
  std::size_t hidden = 0;         // 0 -> d
  std::size_t latent = 0;         // 0 -> d / 2
  double beta_kl = 0.0;
  GenInput gen_input = GenInput::Propagated;
  bool deterministic_gen = false;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  gen::Dims gen_dims(std::size_t num_users, std::size_t num_items) const;
  std::size_t batches_per_epoch(std::size_t train_size) const;
  /// Outer rounds actually run (accounts for `epochs`).
  std::size_t rounds(std::size_t train_size) const;
};

/// Map a sparse Z-space gradient to a bundle over the base tables.
GradientBundle to_bundle(const loss::SparseGrad& grad, const encoder::EmbeddingState& theta,
                         const encoder::NormalizedAdjacency* adj);

struct BranchGradients {
  GradientBundle a;
  GradientBundle r;
  loss::PairGrads pair_grads;  // evaluated on the R-branch embeddings
  loss::LossValue loss_a;
  loss::LossValue loss_r;
};

/// Both branch gradients for one batch. `z_a` and `z_r` are the encoder
/// outputs of the two trajectories (the same object in single mode).
BranchGradients compute_branch_gradients(const encoder::EmbeddingState& theta,
                                         const encoder::NormalizedAdjacency* adj,
                                         const data::TrainBatch& batch,
                                         const encoder::Embeddings& z_a,
                                         const encoder::Embeddings& z_r,
                                         const loss::PairWeights& weights_a,
                                         const loss::PairWeights& weights_r, double alpha);

/// Sum over layers and columns of 1 - cos(G_A[:,c], G_R[:,c]); columns where
/// either norm is below kColumnSkipNorm contribute 0.
double grad_distance(const GradientBundle& g_a, const GradientBundle& g_r);

/// dD/dG_R, zero on skipped columns.
GradientBundle grad_distance_backward(const GradientBundle& g_a, const GradientBundle& g_r);

/// dD/dR_p = <P dD/dG_R, g_p> for every batch pair.
std::vector<double> interest_upstream(const GradientBundle& dd_dgr,
                                      const loss::PairGrads& pair_grads,
                                      const data::TrainBatch& batch,
                                      const encoder::EmbeddingState& theta,
                                      const encoder::NormalizedAdjacency* adj);

/// dD/dphi with theta, G_A and the per-pair tensors held fixed.
gen::GenerativeParams outer_gradient(const GradientBundle& dd_dgr,
                                     const loss::PairGrads& pair_grads,
                                     const gen::GenerativeParams& phi,
                                     const data::TrainBatch& batch,
                                     const encoder::Embeddings& gen_input,
                                     const gen::InterestWeights& interest,
                                     const encoder::EmbeddingState& theta,
                                     const encoder::NormalizedAdjacency* adj);

/// theta rows -= eta * bundle rows; untouched rows are left as they are.
void inner_step(encoder::EmbeddingState& theta, const GradientBundle& grad, double eta);

struct LogRow {
  std::size_t round = 0;
  std::size_t iter = 0;
  double distance = 0.0;
  double align_a = 0.0;
  double align_r = 0.0;
  double unif = 0.0;
  double loss_a = 0.0;
  double loss_r = 0.0;
};

struct EpochRow {
  std::size_t epoch = 0;
  double mean_distance = 0.0;
  double mean_loss_a = 0.0;
  double mean_loss_r = 0.0;
};

struct TrainLog {
  std::vector<LogRow> rows;
  std::vector<EpochRow> epochs;

  /// Header: round,iter,D,align_A,align_R,unif,loss_A,loss_R
  void write_csv(std::ostream& out) const;
  void write_epoch_csv(std::ostream& out) const;
};

struct TrainHooks {
  /// Called after every completed epoch with the current trained parameters.
  std::function<void(std::size_t epoch, const encoder::EmbeddingState&)> on_epoch;
};

struct QGraceResult {
  encoder::EmbeddingState theta;  // the trajectory trained on R
  gen::GenerativeParams phi;
  TrainLog log;
};

struct NormalResult {
  encoder::EmbeddingState theta;
  TrainLog log;
};

QGraceResult qgrace_train(const TrainConfig& config, const data::SplitDataset& split,
                          const TrainHooks& hooks = {});

/// Plain gradient descent on WAU with interaction weights (or BPR), using the
/// same batching as qgrace_train.
NormalResult normal_train(const TrainConfig& config, const data::SplitDataset& split,
                          const TrainHooks& hooks = {});

}  // namespace qgrace::matcher
