#include "qgrace/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "qgrace/error.hpp"
#include "qgrace/random.hpp"

namespace qgrace::encoder {

namespace {

constexpr std::string_view kMagic = "QGRCEMB1";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void xavier_fill(Matrix& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : m.flat()) v = dist(rng);
}

void require_finite(const Matrix& m, int layer) {
  if (!m.all_finite()) {
    throw NumericError("non-finite value in propagation layer " + std::to_string(layer));
  }
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::GMF ? "gmf" : "lightgcn";
}

EncoderKind parse_encoder_kind(std::string_view text) {
  const auto t = lower(text);
  if (t == "gmf") return EncoderKind::GMF;
  if (t == "lightgcn") return EncoderKind::LightGCN;
  throw std::invalid_argument("unknown encoder '" + std::string(text) + "'");
}

EmbeddingState init_embeddings(std::size_t num_users, std::size_t num_items, std::size_t dim,
                               EncoderKind kind, int num_layers, std::uint64_t seed) {
  if (num_users == 0 || num_items == 0 || dim == 0) {
    throw std::invalid_argument("init_embeddings: M, N and d must be >= 1");
  }
  if (num_layers < 0) throw std::invalid_argument("init_embeddings: L must be >= 0");
  EmbeddingState s{{Matrix(num_users, dim), Matrix(num_items, dim)}, kind, num_layers};
  auto rng = make_stream(seed, streams::kEmbeddingInit);
  xavier_fill(s.tables.users, rng);
  xavier_fill(s.tables.items, rng);
  return s;
}

NormalizedAdjacency normalize_adjacency(std::size_t num_users, std::size_t num_items,
                                        const std::vector<data::Edge>& edges) {
  const std::size_t n = num_users + num_items;
  std::vector<std::size_t> degree(n, 0);
  for (const auto& e : edges) {
    if (e.user >= num_users || e.item >= num_items) {
      throw std::invalid_argument("normalize_adjacency: edge out of range");
    }
    ++degree[e.user];
    ++degree[num_users + e.item];
  }

  NormalizedAdjacency adj{num_users, num_items, {}};
  auto& csr = adj.csr;
  csr.n = n;
  csr.row_ptr.assign(n + 1, 0);
  for (std::size_t r = 0; r < n; ++r) csr.row_ptr[r + 1] = csr.row_ptr[r] + degree[r];
  csr.col.resize(csr.row_ptr[n]);
  csr.val.resize(csr.row_ptr[n]);

  auto cursor = csr.row_ptr;
  for (const auto& e : edges) {
    const std::size_t u = e.user;
    const std::size_t i = num_users + e.item;
    const double w = 1.0 / std::sqrt(static_cast<double>(degree[u] * degree[i]));
    csr.col[cursor[u]] = static_cast<std::uint32_t>(i);
    csr.val[cursor[u]++] = w;
    csr.col[cursor[i]] = static_cast<std::uint32_t>(u);
    csr.val[cursor[i]++] = w;
  }
  // Column-sorted rows fix the summation order of every propagation.
  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t r = 0; r < n; ++r) {
    row.clear();
    for (auto e = csr.row_ptr[r]; e < csr.row_ptr[r + 1]; ++e) row.emplace_back(csr.col[e], csr.val[e]);
    std::sort(row.begin(), row.end());
    for (std::size_t k = 0; k < row.size(); ++k) {
      csr.col[csr.row_ptr[r] + k] = row[k].first;
      csr.val[csr.row_ptr[r] + k] = row[k].second;
    }
  }
  return adj;
}

NormalizedAdjacency normalize_adjacency(const data::SplitDataset& split) {
  if (split.train().empty()) throw std::invalid_argument("normalize_adjacency: empty train set");
  return normalize_adjacency(split.num_users(), split.num_items(), split.train());
}

Matrix stack(const Matrix& users, const Matrix& items) {
  if (users.cols() != items.cols()) throw std::invalid_argument("stack: dim mismatch");
  Matrix out(users.rows() + items.rows(), users.cols());
  std::copy(users.flat().begin(), users.flat().end(), out.flat().begin());
  std::copy(items.flat().begin(), items.flat().end(),
            out.flat().begin() + static_cast<std::ptrdiff_t>(users.size()));
  return out;
}

Embeddings unstack(const Matrix& stacked, std::size_t num_users) {
  if (num_users > stacked.rows()) throw std::invalid_argument("unstack: too many users");
  Embeddings z{Matrix(num_users, stacked.cols()),
               Matrix(stacked.rows() - num_users, stacked.cols())};
  auto split_at = stacked.flat().begin() + static_cast<std::ptrdiff_t>(z.users.size());
  std::copy(stacked.flat().begin(), split_at, z.users.flat().begin());
  std::copy(split_at, stacked.flat().end(), z.items.flat().begin());
  return z;
}

Matrix propagate(const NormalizedAdjacency& adj, const Matrix& stacked, int num_layers) {
  if (stacked.rows() != adj.csr.n) {
    throw std::invalid_argument("propagate: expected " + std::to_string(adj.csr.n) + " rows");
  }
  if (num_layers < 0) throw std::invalid_argument("propagate: L must be >= 0");
  require_finite(stacked, 0);
  Matrix sum = stacked;
  Matrix current = stacked;
  Matrix next;
  for (int l = 1; l <= num_layers; ++l) {
    kernels::parallel::spmm(adj.csr, current, next);
    require_finite(next, l);
    axpy(1.0, next.flat(), sum.flat());
    std::swap(current, next);
  }
  const double scale = 1.0 / static_cast<double>(num_layers + 1);
  for (auto& v : sum.flat()) v *= scale;
  return sum;
}

Embeddings encoder_forward(const EmbeddingState& state, const NormalizedAdjacency* adj) {
  Embeddings scratch;
  const auto& z = encoder_forward_view(state, adj, scratch);
  if (&z == &state.tables) return state.tables;
  return scratch;
}

const Embeddings& encoder_forward_view(const EmbeddingState& state,
                                       const NormalizedAdjacency* adj, Embeddings& scratch) {
  if (state.kind == EncoderKind::GMF) return state.tables;
  if (adj == nullptr) throw std::invalid_argument("LightGCN forward needs an adjacency");
  if (adj->num_users != state.num_users() || adj->num_items != state.num_items()) {
    throw std::invalid_argument("adjacency does not match embedding tables");
  }
  scratch = unstack(
      propagate(*adj, stack(state.tables.users, state.tables.items), state.num_layers),
      state.num_users());
  return scratch;
}

Matrix backprop_propagation(const NormalizedAdjacency& adj, const Matrix& grad_on_z,
                            int num_layers) {
  if (grad_on_z.rows() != adj.csr.n) {
    throw std::invalid_argument("backprop_propagation: gradient has " +
                                std::to_string(grad_on_z.rows()) + " rows, expected " +
                                std::to_string(adj.csr.n));
  }
  return propagate(adj, grad_on_z, num_layers);
}

void save_checkpoint(std::ostream& out, const EmbeddingState& s) {
  io::write_magic(out, kMagic);
  io::write_u64(out, s.num_users());
  io::write_u64(out, s.num_items());
  io::write_u64(out, s.dim());
  io::write_u64(out, static_cast<std::uint64_t>(s.kind));
  io::write_u64(out, static_cast<std::uint64_t>(s.num_layers));
  io::write_f64(out, s.tables.users.flat());
  io::write_f64(out, s.tables.items.flat());
  if (!out) throw Error("failed writing embedding checkpoint");
}

EmbeddingState load_checkpoint(std::istream& in) {
  io::expect_magic(in, kMagic);
  const auto m = io::read_u64(in);
  const auto n = io::read_u64(in);
  const auto d = io::read_u64(in);
  const auto kind = io::read_u64(in);
  const auto layers = io::read_u64(in);
  if (kind > 1 || layers > 64 || d == 0) throw Error("corrupt embedding checkpoint header");
  EmbeddingState s{{Matrix(m, d), Matrix(n, d)}, static_cast<EncoderKind>(kind),
                   static_cast<int>(layers)};
  io::read_f64(in, s.tables.users.flat());
  io::read_f64(in, s.tables.items.flat());
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const EmbeddingState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_checkpoint(out, state);
}

EmbeddingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace qgrace::encoder
