#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "qgrace/dataset.hpp"
#include "qgrace/encoder.hpp"
#include "qgrace/matrix.hpp"
#include "qgrace/random.hpp"

namespace qgrace::gen {

enum class Variant : std::uint32_t { MF = 0, MLP = 1, VAE = 2 };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

inline constexpr double kLogvarMin = -30.0;
inline constexpr double kLogvarMax = 10.0;

struct Dims {
  std::size_t num_users = 0;   // MF tables
  std::size_t num_items = 0;
  std::size_t embed_dim = 64;  // encoder d; MLP/VAE input is 2d
  std::size_t gen_dim = 64;    // MF d_g
  std::size_t hidden = 64;     // MLP h
  std::size_t latent = 32;     // VAE m

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Generator parameters phi. Only the blocks of the active variant are
/// allocated; biases are stored as 1 x n matrices.
struct GenerativeParams {
  Variant variant = Variant::MF;
  Dims dims;
  bool deterministic = false;  // VAE: force epsilon = 0

  // MF
  Matrix user_table;  // M x d_g
  Matrix item_table;  // N x d_g
  // MLP
  Matrix w1;  // 2d x h
  Matrix b1;  // 1 x h
  Matrix w2;  // h x 1
  Matrix b2;  // 1 x 1
  // VAE
  Matrix w_en;  // 2d x 2m  (columns [0,m) -> mu, [m,2m) -> logvar)
  Matrix b_en;  // 1 x 2m
  Matrix w_de;  // m x 1
  Matrix b_de;  // 1 x 1

  /// Active blocks in a fixed order (used by the optimizer and checkpoints).
  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;

  /// Same shape, all zeros.
  GenerativeParams zeros_like() const;

  friend bool operator==(const GenerativeParams&, const GenerativeParams&) = default;
};

GenerativeParams init_gen(Variant variant, const Dims& dims, std::uint64_t seed);

/// Generated weights R for a batch, plus what backward needs.
struct InterestWeights {
  std::vector<double> values;  // one per batch pair, in (0,1)
  Matrix hidden;  // MLP only: hidden pre-activations, one row per pair
  // VAE only, one row per pair.
  Matrix mu;
  Matrix logvar_raw;  // before clamping
  Matrix eps;
  bool has_sample_state = false;
};

/// Forward pass over all batch pairs. `z` supplies the MLP/VAE inputs and is
/// treated as a constant. VAE draws epsilon from `noise` unless the params
/// are deterministic or `noise` is null.
InterestWeights gen_forward(const GenerativeParams& phi, const data::TrainBatch& batch,
                            const encoder::Embeddings& z, Rng* noise);

/// Same, for explicit (user,item) pairs.
InterestWeights gen_forward_pairs(const GenerativeParams& phi, std::span<const data::Edge> pairs,
                                  const encoder::Embeddings& z, Rng* noise);

/// VAE forward with caller-supplied epsilon (pairs x m).
InterestWeights gen_forward_with_eps(const GenerativeParams& phi,
                                     std::span<const data::Edge> pairs,
                                     const encoder::Embeddings& z, const Matrix& eps);

/// Gradient of sum_p upstream[p] * R_p w.r.t. every parameter block.
GenerativeParams gen_backward(const GenerativeParams& phi, std::span<const data::Edge> pairs,
                              const encoder::Embeddings& z, const InterestWeights& forward,
                              std::span<const double> upstream);
GenerativeParams gen_backward(const GenerativeParams& phi, const data::TrainBatch& batch,
                              const encoder::Embeddings& z, const InterestWeights& forward,
                              std::span<const double> upstream);

/// Mean Gaussian KL of the VAE posterior over the batch pairs; adds
/// scale * dKL/dphi into `grad`. Zero for other variants.
double vae_kl(const GenerativeParams& phi, const InterestWeights& forward,
              std::span<const data::Edge> pairs, const encoder::Embeddings& z, double scale,
              GenerativeParams* grad);

/// All batch pairs as an edge list (positives then negatives).
std::vector<data::Edge> batch_pairs(const data::TrainBatch& batch);

// Checkpoint: magic "QGRCGEN1", u64 variant, M, N, d, d_g, h, m,
// deterministic flag, then every active block as little-endian float64.
void save_checkpoint(std::ostream& out, const GenerativeParams& phi);
GenerativeParams load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const GenerativeParams& phi);
GenerativeParams load_checkpoint(const std::filesystem::path& path);

}  // namespace qgrace::gen
