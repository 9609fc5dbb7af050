#include "qgrace/matcher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "qgrace/error.hpp"
#include "qgrace/optim.hpp"

namespace qgrace::matcher {

namespace {

using encoder::EmbeddingState;
using encoder::Embeddings;
using encoder::EncoderKind;
using encoder::NormalizedAdjacency;

constexpr const char* kUserLayer = "user_table";
constexpr const char* kItemLayer = "item_table";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<data::Index> all_rows(std::size_t n) {
  std::vector<data::Index> rows(n);
  std::iota(rows.begin(), rows.end(), data::Index{0});
  return rows;
}

void require_adj(const EmbeddingState& theta, const NormalizedAdjacency* adj) {
  if (theta.kind == EncoderKind::LightGCN && adj == nullptr) {
    throw std::invalid_argument("LightGCN needs the normalized adjacency");
  }
}

/// Scatter a touched-row gradient into dense (M+N) x d.
Matrix scatter_stacked(const loss::SparseGrad& g, std::size_t m, std::size_t n) {
  const std::size_t d = g.users.cols();
  Matrix stacked(m + n, d);
  for (std::size_t r = 0; r < g.user_rows.size(); ++r) {
    axpy(1.0, g.users.row(r), stacked.row(g.user_rows[r]));
  }
  for (std::size_t r = 0; r < g.item_rows.size(); ++r) {
    axpy(1.0, g.items.row(r), stacked.row(m + g.item_rows[r]));
  }
  return stacked;
}

/// Column-wise dot and squared norms of two equally shaped matrices.
struct ColumnStats {
  std::vector<double> dot, norm_a2, norm_r2;
};

ColumnStats column_stats(const Matrix& a, const Matrix& r) {
  const std::size_t d = a.cols();
  ColumnStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0),
                std::vector<double>(d, 0.0)};
  for (std::size_t row = 0; row < a.rows(); ++row) {
    auto ra = a.row(row);
    auto rr = r.row(row);
    for (std::size_t c = 0; c < d; ++c) {
      s.dot[c] += ra[c] * rr[c];
      s.norm_a2[c] += ra[c] * ra[c];
      s.norm_r2[c] += rr[c] * rr[c];
    }
  }
  return s;
}

void require_same_layout(const GradientBundle& a, const GradientBundle& b) {
  if (!same_layout(a, b)) {
    throw std::invalid_argument("gradient bundles differ in layers, rows or shape");
  }
}

std::size_t layer_index(const BundleLayer& layer) {
  if (layer.label == kUserLayer) return 0;
  if (layer.label == kItemLayer) return 1;
  throw std::invalid_argument("unknown bundle layer '" + layer.label + "'");
}

double finite_or_throw(double v, const std::string& what, std::size_t round) {
  if (!std::isfinite(v)) {
    throw NumericError("training diverged: non-finite " + what + " in round " +
                       std::to_string(round));
  }
  return v;
}

struct Accumulator {
  std::size_t count = 0;
  double distance = 0.0, loss_a = 0.0, loss_r = 0.0;

  void add(const LogRow& row) {
    ++count;
    distance += row.distance;
    loss_a += row.loss_a;
    loss_r += row.loss_r;
  }
  EpochRow close(std::size_t epoch) {
    const double inv = count ? 1.0 / static_cast<double>(count) : 0.0;
    EpochRow e{epoch, distance * inv, loss_a * inv, loss_r * inv};
    *this = {};
    return e;
  }
};

/// Iteration bookkeeping shared by both training loops.
class Schedule {
 public:
  Schedule(const TrainConfig& cfg, const data::SplitDataset& split)
      : rounds_(cfg.rounds(split.train().size())),
        iter_in_(cfg.iter_in),
        per_epoch_(cfg.batches_per_epoch(split.train().size())) {}

  std::size_t rounds() const { return rounds_; }
  std::size_t iter_in() const { return iter_in_; }

  /// Records one finished iteration; returns true at an epoch boundary.
  bool tick(const LogRow& row, TrainLog& log, const TrainHooks& hooks,
            const EmbeddingState& theta) {
    acc_.add(row);
    if (++done_ % per_epoch_ != 0) return false;
    const auto epoch = done_ / per_epoch_;
    log.epochs.push_back(acc_.close(epoch));
    if (hooks.on_epoch) hooks.on_epoch(epoch, theta);
    return true;
  }

 private:
  std::size_t rounds_, iter_in_, per_epoch_;
  std::size_t done_ = 0;
  Accumulator acc_;
};

std::unique_ptr<NormalizedAdjacency> maybe_adjacency(const TrainConfig& cfg,
                                                     const data::SplitDataset& split) {
  if (cfg.encoder != EncoderKind::LightGCN) return nullptr;
  return std::make_unique<NormalizedAdjacency>(encoder::normalize_adjacency(split));
}

}  // namespace

bool same_layout(const GradientBundle& a, const GradientBundle& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& la = a.layers[l];
    const auto& lb = b.layers[l];
    if (la.label != lb.label || la.rows != lb.rows || la.grad.rows() != lb.grad.rows() ||
        la.grad.cols() != lb.grad.cols() || la.grad.rows() != la.rows.size()) {
      return false;
    }
  }
  return true;
}

std::string_view to_string(Trajectory t) { return t == Trajectory::Single ? "single" : "dual"; }
std::string_view to_string(LossKind l) { return l == LossKind::WAU ? "wau" : "bpr"; }
std::string_view to_string(GenInput g) { return g == GenInput::Propagated ? "propagated" : "base"; }

Trajectory parse_trajectory(std::string_view text) {
  const auto t = lower(text);
  if (t == "single") return Trajectory::Single;
  if (t == "dual") return Trajectory::Dual;
  throw std::invalid_argument("unknown trajectory mode '" + std::string(text) + "'");
}

LossKind parse_loss(std::string_view text) {
  const auto t = lower(text);
  if (t == "wau") return LossKind::WAU;
  if (t == "bpr") return LossKind::BPR;
  throw std::invalid_argument("unknown loss '" + std::string(text) + "'");
}

GenInput parse_gen_input(std::string_view text) {
  const auto t = lower(text);
  if (t == "propagated") return GenInput::Propagated;
  if (t == "base") return GenInput::Base;
  throw std::invalid_argument("unknown generator input '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (iter_in < 1) fail("iter_in must be >= 1");
  if (iter_out < 1 && epochs == 0) fail("iter_out must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (dim < 1) fail("dim must be >= 1");
  if (layers < 0) fail("layers must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be a finite non-negative number");
  if (!(outer_lr >= 0.0) || !std::isfinite(outer_lr)) fail("outer_lr must be finite and >= 0");
  if (!std::isfinite(alpha)) fail("alpha must be finite");
  if (!(beta_kl >= 0.0)) fail("beta_kl must be >= 0");
  if (loss == LossKind::BPR && k_neg < 1) fail("bpr needs k_neg >= 1");
}

gen::Dims TrainConfig::gen_dims(std::size_t num_users, std::size_t num_items) const {
  gen::Dims d;
  d.num_users = num_users;
  d.num_items = num_items;
  d.embed_dim = dim;
  d.gen_dim = gen_dim ? gen_dim : dim;
  d.hidden = hidden ? hidden : dim;
  d.latent = latent ? latent : std::max<std::size_t>(1, dim / 2);
  return d;
}

std::size_t TrainConfig::batches_per_epoch(std::size_t train_size) const {
  return std::max<std::size_t>(1, (train_size + batch_size - 1) / batch_size);
}

std::size_t TrainConfig::rounds(std::size_t train_size) const {
  if (epochs == 0) return iter_out;
  const auto total = epochs * batches_per_epoch(train_size);
  return (total + iter_in - 1) / iter_in;
}

GradientBundle to_bundle(const loss::SparseGrad& grad, const EmbeddingState& theta,
                         const NormalizedAdjacency* adj) {
  require_adj(theta, adj);
  GradientBundle b;
  if (theta.kind == EncoderKind::GMF) {
    b.layers.push_back({kUserLayer, grad.user_rows, grad.users});
    b.layers.push_back({kItemLayer, grad.item_rows, grad.items});
    return b;
  }
  const auto m = theta.num_users();
  const auto n = theta.num_items();
  auto tables = encoder::unstack(
      encoder::backprop_propagation(*adj, scatter_stacked(grad, m, n), theta.num_layers), m);
  b.layers.push_back({kUserLayer, all_rows(m), std::move(tables.users)});
  b.layers.push_back({kItemLayer, all_rows(n), std::move(tables.items)});
  return b;
}

BranchGradients compute_branch_gradients(const EmbeddingState& theta,
                                         const NormalizedAdjacency* adj,
                                         const data::TrainBatch& batch, const Embeddings& z_a,
                                         const Embeddings& z_r,
                                         const loss::PairWeights& weights_a,
                                         const loss::PairWeights& weights_r, double alpha) {
  if (weights_a.values.size() != batch.num_pairs() ||
      weights_r.values.size() != batch.num_pairs()) {
    throw std::invalid_argument("branch weights not aligned with the batch");
  }
  BranchGradients out;
  out.pair_grads = loss::pair_distance_grads(batch, z_r);
  double unif_r = 0.0;
  const auto unif = loss::uniformity_grad(batch, z_r, alpha, &unif_r);

  auto g_r = loss::combine_pair_grads(batch, out.pair_grads, weights_r.values);
  loss::accumulate(g_r, unif);
  out.loss_r.alpha = alpha;
  out.loss_r.alignment = loss::alignment_from_pairs(batch, out.pair_grads, weights_r.values);
  out.loss_r.uniformity = unif_r;
  out.loss_r.total = out.loss_r.alignment + alpha * unif_r;

  loss::SparseGrad g_a;
  if (&z_a == &z_r) {
    g_a = loss::combine_pair_grads(batch, out.pair_grads, weights_a.values);
    loss::accumulate(g_a, unif);
    out.loss_a = out.loss_r;
    out.loss_a.alignment = loss::alignment_from_pairs(batch, out.pair_grads, weights_a.values);
    out.loss_a.total = out.loss_a.alignment + alpha * unif_r;
  } else {
    g_a = loss::wau_grad(batch, weights_a, z_a, alpha, &out.loss_a);
  }
  out.a = to_bundle(g_a, theta, adj);
  out.r = to_bundle(g_r, theta, adj);
  if (!same_layout(out.a, out.r)) throw std::logic_error("branch bundles touch different rows");
  return out;
}

double grad_distance(const GradientBundle& g_a, const GradientBundle& g_r) {
  require_same_layout(g_a, g_r);
  double total = 0.0;
  for (std::size_t l = 0; l < g_a.layers.size(); ++l) {
    const auto s = column_stats(g_a.layers[l].grad, g_r.layers[l].grad);
    for (std::size_t c = 0; c < s.dot.size(); ++c) {
      const double na = std::sqrt(s.norm_a2[c]);
      const double nr = std::sqrt(s.norm_r2[c]);
      if (na < kColumnSkipNorm || nr < kColumnSkipNorm) continue;
      // sqrt of the product keeps cos(G, G) exactly 1.
      total += 1.0 - s.dot[c] / std::sqrt(s.norm_a2[c] * s.norm_r2[c]);
    }
  }
  return total;
}

GradientBundle grad_distance_backward(const GradientBundle& g_a, const GradientBundle& g_r) {
  require_same_layout(g_a, g_r);
  GradientBundle out = g_r;
  for (std::size_t l = 0; l < g_a.layers.size(); ++l) {
    const auto& ga = g_a.layers[l].grad;
    const auto& gr = g_r.layers[l].grad;
    auto& dst = out.layers[l].grad;
    const auto s = column_stats(ga, gr);
    const std::size_t d = s.dot.size();
    // dD/dR_c = -(A_c / (|A_c| |R_c|) - cos_c R_c / |R_c|^2)
    std::vector<double> coef_a(d, 0.0), coef_r(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      const double na = std::sqrt(s.norm_a2[c]);
      const double nr = std::sqrt(s.norm_r2[c]);
      if (na < kColumnSkipNorm || nr < kColumnSkipNorm) continue;
      const double cos = s.dot[c] / std::sqrt(s.norm_a2[c] * s.norm_r2[c]);
      coef_a[c] = -1.0 / (na * nr);
      coef_r[c] = cos / s.norm_r2[c];
    }
    for (std::size_t row = 0; row < dst.rows(); ++row) {
      auto ra = ga.row(row);
      auto rr = gr.row(row);
      auto o = dst.row(row);
      for (std::size_t c = 0; c < d; ++c) o[c] = coef_a[c] * ra[c] + coef_r[c] * rr[c];
    }
  }
  return out;
}

std::vector<double> interest_upstream(const GradientBundle& dd_dgr,
                                      const loss::PairGrads& pair_grads,
                                      const data::TrainBatch& batch,
                                      const EmbeddingState& theta,
                                      const NormalizedAdjacency* adj) {
  require_adj(theta, adj);
  if (dd_dgr.layers.size() != 2) throw std::invalid_argument("expected user and item layers");
  const auto& users = dd_dgr.layers[layer_index(dd_dgr.layers[0]) == 0 ? 0 : 1];
  const auto& items = dd_dgr.layers[layer_index(dd_dgr.layers[0]) == 0 ? 1 : 0];
  const std::size_t P = batch.num_pairs();
  if (pair_grads.user_part.rows() != P) throw std::invalid_argument("pair grads not aligned");
  std::vector<double> upstream(P, 0.0);

  if (theta.kind == EncoderKind::GMF) {
    if (users.rows != batch.users_unique || items.rows != batch.items_unique) {
      throw std::invalid_argument("GMF bundle rows must be the batch's touched rows");
    }
    for (std::size_t p = 0; p < P; ++p) {
      upstream[p] = dot(users.grad.row(batch.user_slot[p]), pair_grads.user_part.row(p)) +
                    dot(items.grad.row(batch.item_slot[p]), pair_grads.item_part.row(p));
    }
    return upstream;
  }

  const auto m = theta.num_users();
  if (users.grad.rows() != m || items.grad.rows() != theta.num_items()) {
    throw std::invalid_argument("LightGCN bundle must cover every row");
  }
  // The propagation operator is symmetric, so its adjoint maps dD/dG_R into Z space.
  const auto h = encoder::unstack(
      encoder::backprop_propagation(*adj, encoder::stack(users.grad, items.grad),
                                    theta.num_layers),
      m);
  for (std::size_t p = 0; p < P; ++p) {
    const auto& e = batch.pair(p);
    upstream[p] = dot(h.users.row(e.user), pair_grads.user_part.row(p)) +
                  dot(h.items.row(e.item), pair_grads.item_part.row(p));
  }
  return upstream;
}

gen::GenerativeParams outer_gradient(const GradientBundle& dd_dgr,
                                     const loss::PairGrads& pair_grads,
                                     const gen::GenerativeParams& phi,
                                     const data::TrainBatch& batch, const Embeddings& gen_input,
                                     const gen::InterestWeights& interest,
                                     const EmbeddingState& theta,
                                     const NormalizedAdjacency* adj) {
  const auto upstream = interest_upstream(dd_dgr, pair_grads, batch, theta, adj);
  return gen::gen_backward(phi, batch, gen_input, interest, upstream);
}

void inner_step(EmbeddingState& theta, const GradientBundle& grad, double eta) {
  for (const auto& layer : grad.layers) {
    auto& table = layer_index(layer) == 0 ? theta.tables.users : theta.tables.items;
    if (layer.grad.cols() != table.cols()) throw std::invalid_argument("inner_step: dim mismatch");
    for (std::size_t r = 0; r < layer.rows.size(); ++r) {
      if (layer.rows[r] >= table.rows()) throw std::invalid_argument("inner_step: row out of range");
      axpy(-eta, layer.grad.row(r), table.row(layer.rows[r]));
    }
  }
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "round,iter,D,align_A,align_R,unif,loss_A,loss_R\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : rows) {
    out << r.round << ',' << r.iter << ',' << r.distance << ',' << r.align_a << ','
        << r.align_r << ',' << r.unif << ',' << r.loss_a << ',' << r.loss_r << '\n';
  }
  out.precision(old_precision);
}

void TrainLog::write_epoch_csv(std::ostream& out) const {
  out << "epoch,mean_D,mean_loss_A,mean_loss_R\n";
  const auto old_precision = out.precision(17);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.mean_distance << ',' << e.mean_loss_a << ',' << e.mean_loss_r
        << '\n';
  }
  out.precision(old_precision);
}

QGraceResult qgrace_train(const TrainConfig& cfg, const data::SplitDataset& split,
                          const TrainHooks& hooks) {
  cfg.validate();
  const auto m = split.num_users();
  const auto n = split.num_items();
  const auto adj = maybe_adjacency(cfg, split);

  QGraceResult result;
  result.theta = encoder::init_embeddings(m, n, cfg.dim, cfg.encoder, cfg.layers, cfg.seed);
  result.phi = gen::init_gen(cfg.generator, cfg.gen_dims(m, n), cfg.seed);
  result.phi.deterministic = cfg.deterministic_gen;
  // Dual mode keeps a second trajectory trained on A, starting from the same init.
  EmbeddingState theta_a = result.theta;
  auto& theta_r = result.theta;
  const bool dual = cfg.trajectory == Trajectory::Dual;

  optim::Adam adam({.lr = cfg.outer_lr});
  auto batch_rng = make_stream(cfg.seed, streams::kBatches);
  auto vae_rng = make_stream(cfg.seed, streams::kVaeNoise);
  Schedule schedule(cfg, split);
  Embeddings scratch_a, scratch_r, base_input;

  for (std::size_t round = 0; round < schedule.rounds(); ++round) {
    auto phi_grad = result.phi.zeros_like();
    for (std::size_t it = 0; it < schedule.iter_in(); ++it) {
      const auto batch = data::sample_batch(split, cfg.batch_size, cfg.k_neg, batch_rng);
      const auto& z_r = encoder::encoder_forward_view(theta_r, adj.get(), scratch_r);
      const auto& z_a = dual ? encoder::encoder_forward_view(theta_a, adj.get(), scratch_a) : z_r;

      const Embeddings* gen_in = &z_r;
      if (cfg.gen_input == GenInput::Base && cfg.generator != gen::Variant::MF) {
        gen_in = &theta_r.tables;
      }
      const auto weights_a = loss::weights_from_graph(batch, split);
      const auto interest = gen::gen_forward(result.phi, batch, *gen_in, &vae_rng);
      const auto weights_r = loss::weights_from_interest(interest.values);

      const auto branches = compute_branch_gradients(theta_r, adj.get(), batch, z_a, z_r,
                                                     weights_a, weights_r, cfg.alpha);
      LogRow row{round, it, grad_distance(branches.a, branches.r), branches.loss_a.alignment,
                 branches.loss_r.alignment, branches.loss_r.uniformity, branches.loss_a.total,
                 branches.loss_r.total};
      finite_or_throw(row.distance, "matching distance", round);
      finite_or_throw(row.loss_r, "loss", round);
      finite_or_throw(row.loss_a, "loss", round);

      const auto dd_dgr = grad_distance_backward(branches.a, branches.r);
      const auto g = outer_gradient(dd_dgr, branches.pair_grads, result.phi, batch, *gen_in,
                                    interest, theta_r, adj.get());
      auto dst = phi_grad.blocks();
      const auto src = g.blocks();
      for (std::size_t b = 0; b < dst.size(); ++b) axpy(1.0, src[b]->flat(), dst[b]->flat());
      if (cfg.beta_kl > 0.0) {
        const auto pairs = gen::batch_pairs(batch);
        gen::vae_kl(result.phi, interest, pairs, *gen_in, cfg.beta_kl, &phi_grad);
      }

      inner_step(theta_r, branches.r, cfg.lr);
      if (dual) inner_step(theta_a, branches.a, cfg.lr);
      result.log.rows.push_back(row);
      schedule.tick(row, result.log, hooks, theta_r);
    }
    for (const auto* b : phi_grad.blocks()) {
      if (!b->all_finite()) finite_or_throw(NAN, "generator gradient", round);
    }
    const auto grads = std::as_const(phi_grad).blocks();
    adam.step(result.phi.blocks(), grads);
  }
  return result;
}

NormalResult normal_train(const TrainConfig& cfg, const data::SplitDataset& split,
                          const TrainHooks& hooks) {
  cfg.validate();
  const auto adj = maybe_adjacency(cfg, split);
  NormalResult result;
  result.theta = encoder::init_embeddings(split.num_users(), split.num_items(), cfg.dim,
                                          cfg.encoder, cfg.layers, cfg.seed);
  auto batch_rng = make_stream(cfg.seed, streams::kBatches);
  Schedule schedule(cfg, split);
  Embeddings scratch;

  for (std::size_t round = 0; round < schedule.rounds(); ++round) {
    for (std::size_t it = 0; it < schedule.iter_in(); ++it) {
      const auto batch = data::sample_batch(split, cfg.batch_size, cfg.k_neg, batch_rng);
      const auto& z = encoder::encoder_forward_view(result.theta, adj.get(), scratch);
      LogRow row{round, it};
      loss::SparseGrad grad;
      if (cfg.loss == LossKind::WAU) {
        loss::LossValue value;
        grad = loss::wau_grad(batch, loss::weights_from_graph(batch, split), z, cfg.alpha, &value);
        row.align_a = row.align_r = value.alignment;
        row.unif = value.uniformity;
        row.loss_a = row.loss_r = value.total;
      } else {
        double value = 0.0;
        grad = loss::bpr_grad(batch, z, &value);
        row.loss_a = row.loss_r = value;
      }
      finite_or_throw(row.loss_a, "loss", round);
      inner_step(result.theta, to_bundle(grad, result.theta, adj.get()), cfg.lr);
      result.log.rows.push_back(row);
      schedule.tick(row, result.log, hooks, result.theta);
    }
  }
  return result;
}

}  // namespace qgrace::matcher
