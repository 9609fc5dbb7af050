#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "qgrace/dataset.hpp"
#include "qgrace/kernels.hpp"
#include "qgrace/matrix.hpp"

namespace qgrace::encoder {

enum class EncoderKind : std::uint32_t { GMF = 0, LightGCN = 1 };

std::string_view to_string(EncoderKind kind);
/// Accepts "gmf" / "lightgcn" (case-insensitive).
EncoderKind parse_encoder_kind(std::string_view text);

/// Encoder output Z (or a gradient shaped like it).
struct Embeddings {
  Matrix users;
  Matrix items;

  friend bool operator==(const Embeddings&, const Embeddings&) = default;
};

/// Trainable parameters theta: one base embedding row per user and item.
struct EmbeddingState {
  Embeddings tables;  // users: M x d, items: N x d
  EncoderKind kind = EncoderKind::GMF;
  int num_layers = 2;  // LightGCN propagation depth

  std::size_t num_users() const { return tables.users.rows(); }
  std::size_t num_items() const { return tables.items.rows(); }
  std::size_t dim() const { return tables.users.cols(); }

  friend bool operator==(const EmbeddingState&, const EmbeddingState&) = default;
};

/// Xavier-uniform tables: U(-b, b) with b = sqrt(6 / (rows + d)) per table.
EmbeddingState init_embeddings(std::size_t num_users, std::size_t num_items, std::size_t dim,
                               EncoderKind kind, int num_layers, std::uint64_t seed);

/// Symmetric bipartite adjacency over M + N nodes (users first, then items)
/// with entry 1/sqrt(deg(u) deg(i)) on each train edge.
struct NormalizedAdjacency {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  kernels::CsrMatrix csr;
};

NormalizedAdjacency normalize_adjacency(std::size_t num_users, std::size_t num_items,
                                        const std::vector<data::Edge>& edges);
NormalizedAdjacency normalize_adjacency(const data::SplitDataset& split);

/// Stack users over items into one (M+N) x d matrix, and back.
Matrix stack(const Matrix& users, const Matrix& items);
Embeddings unstack(const Matrix& stacked, std::size_t num_users);

/// (1/(L+1)) * sum_{l=0..L} A^l x over the stacked node matrix.
Matrix propagate(const NormalizedAdjacency& adj, const Matrix& stacked, int num_layers);

/// GMF returns the tables; LightGCN propagates them. `adj` is required for
/// LightGCN and ignored otherwise. Throws NumericError naming the layer when
/// propagation produces non-finite values.
Embeddings encoder_forward(const EmbeddingState& state, const NormalizedAdjacency* adj);

/// Like encoder_forward, but GMF returns a reference to the state's own
/// tables instead of a copy; LightGCN output is written to `scratch`.
const Embeddings& encoder_forward_view(const EmbeddingState& state,
                                       const NormalizedAdjacency* adj, Embeddings& scratch);

/// Adjoint of the propagation: maps dL/dZ (stacked) to dL/d(tables).
/// Since the normalized adjacency is symmetric this is the same operator.
Matrix backprop_propagation(const NormalizedAdjacency& adj, const Matrix& grad_on_z,
                            int num_layers);

// Checkpoint: magic "QGRCEMB1", u64 M, N, d, kind, L, then both tables as
// row-major little-endian float64.
void save_checkpoint(std::ostream& out, const EmbeddingState& state);
EmbeddingState load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const EmbeddingState& state);
EmbeddingState load_checkpoint(const std::filesystem::path& path);

}  // namespace qgrace::encoder
