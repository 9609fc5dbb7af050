#include "qgrace/generator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "qgrace/error.hpp"

namespace qgrace::gen {

namespace {

constexpr std::string_view kMagic = "QGRCGEN1";

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void xavier_fill(Matrix& m, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : m.flat()) v = dist(rng);
}

/// Distinct rows one side of the pairs refers to, and each pair's index into them.
struct RowSlots {
  std::vector<data::Index> rows;
  std::vector<std::size_t> slot;
};

RowSlots row_slots(std::span<const data::Edge> pairs, bool users, std::size_t table_rows) {
  constexpr auto kUnseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> where(table_rows, kUnseen);
  RowSlots s;
  s.slot.resize(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto r = users ? pairs[p].user : pairs[p].item;
    if (where[r] == kUnseen) {
      where[r] = s.rows.size();
      s.rows.push_back(r);
    }
    s.slot[p] = where[r];
  }
  return s;
}

/// The first layer reads concat(z_u, z_i), so W^T x splits into a user half
/// (rows [0, d) of W) and an item half (rows [d, 2d)). Each half is applied
/// once per distinct row instead of once per pair.
struct FirstLayerInput {
  RowSlots users, items;

  FirstLayerInput(std::span<const data::Edge> pairs, const encoder::Embeddings& z)
      : users(row_slots(pairs, true, z.users.rows())),
        items(row_slots(pairs, false, z.items.rows())) {}
};

/// Row r holds sum_j table(rows[r], j) * w.row(offset + j).
Matrix half_product(const Matrix& w, std::size_t offset, const Matrix& table,
                    const std::vector<data::Index>& rows) {
  Matrix out(rows.size(), w.cols());
  const auto count = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < count; ++r) {
    const auto x = table.row(rows[static_cast<std::size_t>(r)]);
    auto dst = out.row(static_cast<std::size_t>(r));
    for (std::size_t j = 0; j < x.size(); ++j) axpy(x[j], w.row(offset + j), dst);
  }
  return out;
}

/// Pre-activations b + W^T concat(z_u, z_i), one row per pair.
Matrix first_layer(const Matrix& w, const Matrix& b, const FirstLayerInput& in,
                   const encoder::Embeddings& z) {
  const auto hu = half_product(w, 0, z.users, in.users.rows);
  const auto hi = half_product(w, z.users.cols(), z.items, in.items.rows);
  const auto bias = b.row(0);
  Matrix out(in.users.slot.size(), w.cols());
  for (std::size_t p = 0; p < out.rows(); ++p) {
    const auto u = hu.row(in.users.slot[p]);
    const auto i = hi.row(in.items.slot[p]);
    auto dst = out.row(p);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = bias[k] + u[k] + i[k];
  }
  return out;
}

/// dW += sum_p concat(z_u, z_i) dpre_p^T and db += sum_p dpre_p, with dpre
/// summed per distinct row before the outer products.
void first_layer_backward(const Matrix& dpre, const FirstLayerInput& in,
                          const encoder::Embeddings& z, Matrix& dw, Matrix& db) {
  Matrix su(in.users.rows.size(), dpre.cols());
  Matrix si(in.items.rows.size(), dpre.cols());
  for (std::size_t p = 0; p < dpre.rows(); ++p) {
    axpy(1.0, dpre.row(p), su.row(in.users.slot[p]));
    axpy(1.0, dpre.row(p), si.row(in.items.slot[p]));
    axpy(1.0, dpre.row(p), db.row(0));
  }
  const std::size_t d = z.users.cols();
  for (std::size_t r = 0; r < su.rows(); ++r) {
    const auto x = z.users.row(in.users.rows[r]);
    for (std::size_t j = 0; j < d; ++j) axpy(x[j], su.row(r), dw.row(j));
  }
  for (std::size_t r = 0; r < si.rows(); ++r) {
    const auto x = z.items.row(in.items.rows[r]);
    for (std::size_t j = 0; j < d; ++j) axpy(x[j], si.row(r), dw.row(d + j));
  }
}

void check_inputs(const GenerativeParams& phi, std::span<const data::Edge> pairs,
                  const encoder::Embeddings& z) {
  const auto& d = phi.dims;
  for (const auto& e : pairs) {
    if (e.user >= d.num_users || e.item >= d.num_items) {
      throw std::invalid_argument("generator pair out of range");
    }
  }
  if (phi.variant != Variant::MF) {
    if (z.users.cols() != d.embed_dim || z.items.cols() != d.embed_dim) {
      throw std::invalid_argument("generator input dim " + std::to_string(z.users.cols()) +
                                  " does not match configured d " + std::to_string(d.embed_dim));
    }
    if (z.users.rows() != d.num_users || z.items.rows() != d.num_items) {
      throw std::invalid_argument("generator inputs do not cover all users/items");
    }
  }
}

void require_finite_output(double r, const data::Edge& e) {
  if (!std::isfinite(r)) {
    throw NumericError("non-finite interest weight for pair (" + std::to_string(e.user) + ", " +
                       std::to_string(e.item) + ")");
  }
}

double mf_score(const GenerativeParams& phi, const data::Edge& e) {
  return dot(phi.user_table.row(e.user), phi.item_table.row(e.item));
}

double mlp_score(const GenerativeParams& phi, std::span<const double> a) {
  double s = phi.b2(0, 0);
  for (std::size_t k = 0; k < a.size(); ++k) s += phi.w2(k, 0) * std::max(a[k], 0.0);
  return s;
}

double clamp_logvar(double lv) { return std::clamp(lv, kLogvarMin, kLogvarMax); }
bool logvar_active(double lv) { return lv > kLogvarMin && lv < kLogvarMax; }

InterestWeights forward_impl(const GenerativeParams& phi, std::span<const data::Edge> pairs,
                             const encoder::Embeddings& z, const Matrix* eps) {
  check_inputs(phi, pairs, z);
  const std::size_t P = pairs.size();
  InterestWeights out;
  out.values.assign(P, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(P);

  switch (phi.variant) {
    case Variant::MF:
      for (std::size_t p = 0; p < P; ++p) out.values[p] = sigmoid(mf_score(phi, pairs[p]));
      break;
    case Variant::MLP:
      out.hidden = first_layer(phi.w1, phi.b1, FirstLayerInput(pairs, z), z);
      for (std::size_t p = 0; p < P; ++p) out.values[p] = sigmoid(mlp_score(phi, out.hidden.row(p)));
      break;
    case Variant::VAE: {
      const std::size_t m = phi.w_de.rows();
      out.mu = Matrix(P, m);
      out.logvar_raw = Matrix(P, m);
      out.eps = eps != nullptr ? *eps : Matrix(P, m);
      if (out.eps.rows() != P || out.eps.cols() != m) {
        throw std::invalid_argument("VAE epsilon must be pairs x latent");
      }
      out.has_sample_state = true;
      const auto enc_all = first_layer(phi.w_en, phi.b_en, FirstLayerInput(pairs, z), z);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t sp = 0; sp < count; ++sp) {
        const auto p = static_cast<std::size_t>(sp);
        const auto enc = enc_all.row(p);
        double s = phi.b_de(0, 0);
        for (std::size_t k = 0; k < m; ++k) {
          const double mu = enc[k];
          const double lv_raw = enc[m + k];
          out.mu(p, k) = mu;
          out.logvar_raw(p, k) = lv_raw;
          const double latent = mu + std::exp(0.5 * clamp_logvar(lv_raw)) * out.eps(p, k);
          s += phi.w_de(k, 0) * latent;
        }
        out.values[p] = sigmoid(s);
      }
      break;
    }
  }
  for (std::size_t p = 0; p < P; ++p) require_finite_output(out.values[p], pairs[p]);
  return out;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::MF: return "mf";
    case Variant::MLP: return "mlp";
    case Variant::VAE: return "vae";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  std::string t(text);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "mf") return Variant::MF;
  if (t == "mlp") return Variant::MLP;
  if (t == "vae") return Variant::VAE;
  throw std::invalid_argument("unknown generator '" + std::string(text) + "'");
}

std::vector<Matrix*> GenerativeParams::blocks() {
  switch (variant) {
    case Variant::MF: return {&user_table, &item_table};
    case Variant::MLP: return {&w1, &b1, &w2, &b2};
    case Variant::VAE: return {&w_en, &b_en, &w_de, &b_de};
  }
  return {};
}

std::vector<const Matrix*> GenerativeParams::blocks() const {
  auto mut = const_cast<GenerativeParams*>(this)->blocks();
  return {mut.begin(), mut.end()};
}

GenerativeParams GenerativeParams::zeros_like() const {
  GenerativeParams z = *this;
  for (auto* b : z.blocks()) b->fill(0.0);
  return z;
}

GenerativeParams init_gen(Variant variant, const Dims& dims, std::uint64_t seed) {
  GenerativeParams phi;
  phi.variant = variant;
  phi.dims = dims;
  auto rng = make_stream(seed, streams::kGeneratorInit);
  const std::size_t in = 2 * dims.embed_dim;
  switch (variant) {
    case Variant::MF:
      if (dims.num_users == 0 || dims.num_items == 0 || dims.gen_dim == 0) {
        throw std::invalid_argument("MF generator needs M, N, d_g >= 1");
      }
      phi.user_table = Matrix(dims.num_users, dims.gen_dim);
      phi.item_table = Matrix(dims.num_items, dims.gen_dim);
      xavier_fill(phi.user_table, rng);
      xavier_fill(phi.item_table, rng);
      break;
    case Variant::MLP:
      if (dims.embed_dim == 0 || dims.hidden == 0) {
        throw std::invalid_argument("MLP generator needs d, h >= 1");
      }
      phi.w1 = Matrix(in, dims.hidden);
      phi.b1 = Matrix(1, dims.hidden);
      phi.w2 = Matrix(dims.hidden, 1);
      phi.b2 = Matrix(1, 1);
      xavier_fill(phi.w1, rng);
      xavier_fill(phi.w2, rng);
      break;
    case Variant::VAE:
      if (dims.embed_dim == 0 || dims.latent == 0) {
        throw std::invalid_argument("VAE generator needs d, m >= 1");
      }
      phi.w_en = Matrix(in, 2 * dims.latent);
      phi.b_en = Matrix(1, 2 * dims.latent);
      phi.w_de = Matrix(dims.latent, 1);
      phi.b_de = Matrix(1, 1);
      xavier_fill(phi.w_en, rng);
      xavier_fill(phi.w_de, rng);
      break;
  }
  return phi;
}

std::vector<data::Edge> batch_pairs(const data::TrainBatch& batch) {
  std::vector<data::Edge> pairs;
  pairs.reserve(batch.num_pairs());
  pairs.insert(pairs.end(), batch.positives.begin(), batch.positives.end());
  pairs.insert(pairs.end(), batch.negatives.begin(), batch.negatives.end());
  return pairs;
}

InterestWeights gen_forward_pairs(const GenerativeParams& phi, std::span<const data::Edge> pairs,
                                  const encoder::Embeddings& z, Rng* noise) {
  if (phi.variant != Variant::VAE || phi.deterministic || noise == nullptr) {
    return forward_impl(phi, pairs, z, nullptr);
  }
  Matrix eps(pairs.size(), phi.w_de.rows());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : eps.flat()) v = normal(*noise);
  return forward_impl(phi, pairs, z, &eps);
}

InterestWeights gen_forward(const GenerativeParams& phi, const data::TrainBatch& batch,
                            const encoder::Embeddings& z, Rng* noise) {
  const auto pairs = batch_pairs(batch);
  return gen_forward_pairs(phi, pairs, z, noise);
}

InterestWeights gen_forward_with_eps(const GenerativeParams& phi,
                                     std::span<const data::Edge> pairs,
                                     const encoder::Embeddings& z, const Matrix& eps) {
  if (phi.variant != Variant::VAE) throw std::invalid_argument("epsilon only applies to VAE");
  return forward_impl(phi, pairs, z, &eps);
}

GenerativeParams gen_backward(const GenerativeParams& phi, std::span<const data::Edge> pairs,
                              const encoder::Embeddings& z, const InterestWeights& fwd,
                              std::span<const double> upstream) {
  if (upstream.size() != pairs.size() || fwd.values.size() != pairs.size()) {
    throw std::invalid_argument("gen_backward: upstream not aligned with pairs");
  }
  if (phi.variant == Variant::VAE && !fwd.has_sample_state) {
    throw std::invalid_argument("gen_backward: VAE needs the retained (mu, logvar, eps) state");
  }
  if (phi.variant == Variant::MLP && fwd.hidden.rows() != pairs.size()) {
    throw std::invalid_argument("gen_backward: MLP needs the retained hidden pre-activations");
  }
  check_inputs(phi, pairs, z);
  auto grad = phi.zeros_like();
  const std::size_t P = pairs.size();

  switch (phi.variant) {
    case Variant::MF:
      for (std::size_t p = 0; p < P; ++p) {
        if (upstream[p] == 0.0) continue;
        const double r = fwd.values[p];
        const double ds = upstream[p] * r * (1.0 - r);
        const auto& e = pairs[p];
        axpy(ds, phi.item_table.row(e.item), grad.user_table.row(e.user));
        axpy(ds, phi.user_table.row(e.user), grad.item_table.row(e.item));
      }
      break;
    case Variant::MLP: {
      const std::size_t h = phi.w1.cols();
      Matrix da(P, h);
      for (std::size_t p = 0; p < P; ++p) {
        if (upstream[p] == 0.0) continue;
        const double r = fwd.values[p];
        const double ds = upstream[p] * r * (1.0 - r);
        const auto a = fwd.hidden.row(p);
        grad.b2(0, 0) += ds;
        for (std::size_t k = 0; k < h; ++k) {
          const bool on = a[k] > 0.0;
          grad.w2(k, 0) += ds * (on ? a[k] : 0.0);
          da(p, k) = on ? ds * phi.w2(k, 0) : 0.0;
        }
      }
      first_layer_backward(da, FirstLayerInput(pairs, z), z, grad.w1, grad.b1);
      break;
    }
    case Variant::VAE: {
      const std::size_t m = phi.w_de.rows();
      Matrix denc(P, 2 * m);
      for (std::size_t p = 0; p < P; ++p) {
        if (upstream[p] == 0.0) continue;
        const double r = fwd.values[p];
        const double ds = upstream[p] * r * (1.0 - r);
        grad.b_de(0, 0) += ds;
        for (std::size_t k = 0; k < m; ++k) {
          const double lv_raw = fwd.logvar_raw(p, k);
          const double sigma = std::exp(0.5 * clamp_logvar(lv_raw));
          const double latent = fwd.mu(p, k) + sigma * fwd.eps(p, k);
          grad.w_de(k, 0) += ds * latent;
          const double dlatent = ds * phi.w_de(k, 0);
          denc(p, k) = dlatent;
          denc(p, m + k) = logvar_active(lv_raw) ? dlatent * fwd.eps(p, k) * 0.5 * sigma : 0.0;
        }
      }
      first_layer_backward(denc, FirstLayerInput(pairs, z), z, grad.w_en, grad.b_en);
      break;
    }
  }
  return grad;
}

GenerativeParams gen_backward(const GenerativeParams& phi, const data::TrainBatch& batch,
                              const encoder::Embeddings& z, const InterestWeights& forward,
                              std::span<const double> upstream) {
  const auto pairs = batch_pairs(batch);
  return gen_backward(phi, pairs, z, forward, upstream);
}

double vae_kl(const GenerativeParams& phi, const InterestWeights& fwd,
              std::span<const data::Edge> pairs, const encoder::Embeddings& z, double scale,
              GenerativeParams* grad) {
  if (phi.variant != Variant::VAE || pairs.empty()) return 0.0;
  if (!fwd.has_sample_state) throw std::invalid_argument("vae_kl: missing sample state");
  const std::size_t m = phi.w_de.rows();
  const double inv_p = 1.0 / static_cast<double>(pairs.size());
  Matrix denc(pairs.size(), 2 * m);
  double kl = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    for (std::size_t k = 0; k < m; ++k) {
      const double mu = fwd.mu(p, k);
      const double lv_raw = fwd.logvar_raw(p, k);
      const double lv = clamp_logvar(lv_raw);
      kl += 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
      denc(p, k) = scale * inv_p * mu;
      denc(p, m + k) = logvar_active(lv_raw) ? scale * inv_p * 0.5 * (std::exp(lv) - 1.0) : 0.0;
    }
  }
  if (grad != nullptr && scale != 0.0) {
    first_layer_backward(denc, FirstLayerInput(pairs, z), z, grad->w_en, grad->b_en);
  }
  return kl * inv_p;
}

void save_checkpoint(std::ostream& out, const GenerativeParams& phi) {
  io::write_magic(out, kMagic);
  io::write_u64(out, static_cast<std::uint64_t>(phi.variant));
  const auto& d = phi.dims;
  for (auto v : {d.num_users, d.num_items, d.embed_dim, d.gen_dim, d.hidden, d.latent}) {
    io::write_u64(out, v);
  }
  io::write_u64(out, phi.deterministic ? 1 : 0);
  for (const auto* b : phi.blocks()) io::write_f64(out, b->flat());
  if (!out) throw Error("failed writing generator checkpoint");
}

GenerativeParams load_checkpoint(std::istream& in) {
  io::expect_magic(in, kMagic);
  const auto variant = io::read_u64(in);
  if (variant > 2) throw Error("corrupt generator checkpoint header");
  Dims d;
  d.num_users = io::read_u64(in);
  d.num_items = io::read_u64(in);
  d.embed_dim = io::read_u64(in);
  d.gen_dim = io::read_u64(in);
  d.hidden = io::read_u64(in);
  d.latent = io::read_u64(in);
  const bool deterministic = io::read_u64(in) != 0;
  auto phi = init_gen(static_cast<Variant>(variant), d, 0);
  phi.deterministic = deterministic;
  for (auto* b : phi.blocks()) io::read_f64(in, b->flat());
  return phi;
}

void save_checkpoint(const std::filesystem::path& path, const GenerativeParams& phi) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_checkpoint(out, phi);
}

GenerativeParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace qgrace::gen
