#include <gtest/gtest.h>

#include <cmath>

#include "qgrace/error.hpp"
#include "qgrace/losses.hpp"
#include "test_support.hpp"

namespace qgrace::loss {
namespace {

using data::Edge;
using testing::ErrorTracker;

encoder::Embeddings embed(std::vector<std::vector<double>> users,
                          std::vector<std::vector<double>> items) {
  auto to_matrix = [](const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    }
    return m;
  };
  return {to_matrix(users), to_matrix(items)};
}

PairWeights ones(const data::TrainBatch& batch) {
  std::vector<double> w(batch.num_pairs(), 0.0);
  std::fill(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(batch.num_positives()), 1.0);
  return {w, WeightSource::FromA};
}

/// Rebuilds the dense gradient from a sparse one (zero on untouched rows).
encoder::Embeddings densify(const SparseGrad& g, const encoder::Embeddings& like) {
  encoder::Embeddings out{Matrix(like.users.rows(), like.users.cols()),
                          Matrix(like.items.rows(), like.items.cols())};
  for (std::size_t r = 0; r < g.user_rows.size(); ++r) {
    for (std::size_t c = 0; c < g.users.cols(); ++c) out.users(g.user_rows[r], c) = g.users(r, c);
  }
  for (std::size_t r = 0; r < g.item_rows.size(); ++r) {
    for (std::size_t c = 0; c < g.items.cols(); ++c) out.items(g.item_rows[r], c) = g.items(r, c);
  }
  return out;
}

template <typename F>
double worst_fd_error(const encoder::Embeddings& analytic, encoder::Embeddings z, F&& f) {
  ErrorTracker err{1e-6};
  for (auto pair : {std::pair{&z.users, &analytic.users}, std::pair{&z.items, &analytic.items}}) {
    for (std::size_t k = 0; k < pair.first->size(); ++k) {
      const double fd =
          testing::central_difference([&] { return f(z); }, pair.first->flat()[k], 1e-6);
      err.add(pair.second->flat()[k], fd);
    }
  }
  return err.worst;
}

TEST(Alignment, OrthogonalUnitPairIsTwo) {
  const auto z = embed({{1, 0}}, {{0, 1}});
  const auto batch = data::make_batch({{0, 0}}, {}, 0);
  EXPECT_NEAR(alignment_term(batch, ones(batch), z), 2.0, 1e-15);
}

TEST(Uniformity, TwoOrthogonalRowsPerSide) {
  // Each side: one pair at squared distance 2, log e^{-4} = -4.
  const auto z = embed({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}});
  const auto batch = data::make_batch({{0, 0}, {1, 1}}, {}, 0);
  EXPECT_NEAR(uniformity_term(batch, z), -4.0, 1e-12);
}

TEST(Uniformity, SingleMemberHalfContributesZero) {
  const auto z = embed({{1, 0}}, {{1, 0}, {0, 1}});
  const auto batch = data::make_batch({{0, 0}, {0, 1}}, {}, 0);
  EXPECT_NEAR(uniformity_term(batch, z), -2.0, 1e-12);
}

TEST(Wau, MatchesOracleOnFourPairs) {
  auto rng = make_stream(11, 0);
  const auto z = testing::random_embeddings(3, 4, 3, rng);
  const auto batch = data::make_batch({{0, 1}, {2, 3}}, {{0, 2}, {2, 0}}, 1);
  const std::vector<double> w{1.0, 0.5, 0.0, 0.25};
  const double expected = testing::oracle::wau(batch, w, z, 0.7);
  const auto v = wau_loss(batch, {w, WeightSource::FromR}, z, 0.7);
  EXPECT_NEAR(v.total, expected, 1e-12);
  EXPECT_NEAR(v.total, v.alignment + 0.7 * v.uniformity, 1e-15);
}

TEST(Wau, LinearInWeights) {
  auto rng = make_stream(12, 0);
  const auto z = testing::random_embeddings(6, 7, 4, rng);
  const auto batch = testing::random_batch(6, 7, 5, 2, rng);
  const auto w1 = testing::random_weights(batch.num_pairs(), rng);
  const auto w2 = testing::random_weights(batch.num_pairs(), rng);
  std::vector<double> mix(w1.size());
  for (std::size_t p = 0; p < mix.size(); ++p) mix[p] = 0.3 * w1[p] + 0.7 * w2[p];
  const double a1 = alignment_term(batch, {w1}, z);
  const double a2 = alignment_term(batch, {w2}, z);
  EXPECT_NEAR(alignment_term(batch, {mix}, z), 0.3 * a1 + 0.7 * a2, 1e-12);
}

TEST(Wau, FromGraphWeightsEqualAuBitwise) {
  auto rng = make_stream(13, 0);
  const auto split = testing::split_from_edges(4, 5, {{0, 0}, {1, 2}, {2, 4}, {3, 1}, {0, 3}});
  const auto z = testing::random_embeddings(4, 5, 3, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const auto batch = data::sample_batch(split, 3, 2, rng);
    const auto w = weights_from_graph(batch, split);
    for (std::size_t p = 0; p < batch.num_pairs(); ++p) {
      EXPECT_EQ(w.values[p], p < batch.num_positives() ? 1.0 : 0.0);
    }
    const auto wau = wau_loss(batch, w, z, 1.3);
    const auto au = au_loss(batch, z, 1.3);
    EXPECT_EQ(wau.total, au.total);
    EXPECT_EQ(wau.alignment, au.alignment);
    const auto gw = wau_grad(batch, w, z, 1.3);
    const auto ga = au_grad(batch, z, 1.3);
    EXPECT_EQ(gw.users, ga.users);
    EXPECT_EQ(gw.items, ga.items);
  }
}

TEST(Wau, RotationInvariant) {
  auto rng = make_stream(14, 0);
  const auto z = testing::random_embeddings(5, 6, 2, rng);
  const auto batch = testing::random_batch(5, 6, 4, 1, rng);
  const auto w = testing::random_weights(batch.num_pairs(), rng);
  const double t = 0.83;
  auto rotate = [&](Matrix m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double x = m(r, 0), y = m(r, 1);
      m(r, 0) = std::cos(t) * x - std::sin(t) * y;
      m(r, 1) = std::sin(t) * x + std::cos(t) * y;
    }
    return m;
  };
  const encoder::Embeddings zr{rotate(z.users), rotate(z.items)};
  EXPECT_NEAR(wau_loss(batch, {w}, z, 1.0).total, wau_loss(batch, {w}, zr, 1.0).total, 1e-12);
}

TEST(WauGrad, MatchesFiniteDifferences) {
  auto rng = make_stream(15, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto z = testing::random_embeddings(6, 8, 4, rng);
    const auto batch = testing::random_batch(6, 8, 4, 2, rng);
    const auto w = testing::random_weights(batch.num_pairs(), rng);
    LossValue value;
    const auto g = wau_grad(batch, {w}, z, 0.9, &value);
    EXPECT_NEAR(value.total, testing::oracle::wau(batch, w, z, 0.9), 1e-12);
    const double err = worst_fd_error(densify(g, z), z, [&](const encoder::Embeddings& zz) {
      return testing::oracle::wau(batch, w, zz, 0.9);
    });
    EXPECT_LT(err, 1e-6) << "trial " << trial;
  }
}

TEST(WauGrad, UntouchedRowsAreAbsent) {
  auto rng = make_stream(16, 0);
  const auto z = testing::random_embeddings(10, 10, 3, rng);
  const auto batch = data::make_batch({{2, 5}}, {{2, 7}}, 1);
  const auto g = wau_grad(batch, {{1.0, 0.0}}, z, 1.0);
  EXPECT_EQ(g.user_rows, (std::vector<data::Index>{2}));
  EXPECT_EQ(g.item_rows, (std::vector<data::Index>{5, 7}));
  const auto dense = densify(g, z);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(dense.users(0, c), 0.0);
}

TEST(PairGrads, SimpleExample) {
  // u = (1,0), i = (0,1), B = 1: grad on u is (2/B)(u~ - i~) projected onto
  // the tangent of u, i.e. (0,-1) times 2.
  const auto z = embed({{1, 0}}, {{0, 1}});
  const auto batch = data::make_batch({{0, 0}}, {}, 0);
  const auto g = pair_distance_grads(batch, z);
  EXPECT_NEAR(g.sq_dist[0], 2.0, 1e-15);
  EXPECT_NEAR(g.user_part(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(g.user_part(0, 1), -2.0, 1e-15);
  EXPECT_NEAR(g.item_part(0, 0), -2.0, 1e-15);
  EXPECT_NEAR(g.item_part(0, 1), 0.0, 1e-15);
}

TEST(PairGrads, CombineEqualsAlignmentGradient) {
  auto rng = make_stream(17, 0);
  const auto z = testing::random_embeddings(5, 6, 3, rng);
  const auto batch = testing::random_batch(5, 6, 4, 2, rng);
  const auto w = testing::random_weights(batch.num_pairs(), rng);
  const auto pg = pair_distance_grads(batch, z);
  EXPECT_NEAR(alignment_from_pairs(batch, pg, w), alignment_term(batch, {w}, z), 1e-13);
  auto combined = combine_pair_grads(batch, pg, w);
  accumulate(combined, uniformity_grad(batch, z, 0.4));
  const auto full = wau_grad(batch, {w}, z, 0.4);
  EXPECT_LT(max_abs_diff(combined.users, full.users), 1e-13);
  EXPECT_LT(max_abs_diff(combined.items, full.items), 1e-13);
}

TEST(Bpr, EqualScoresGiveLogTwo) {
  const auto z = embed({{1, 0}}, {{0, 1}, {0, 2}});
  const auto batch = data::make_batch({{0, 0}}, {{0, 1}}, 1);
  EXPECT_NEAR(bpr_loss(batch, z), std::log(2.0), 1e-15);
}

TEST(Bpr, LargeMarginIsNearZero) {
  // Normalized scores are bounded by 1, so scale the margin through many
  // identical triples and check the per-triple value directly instead.
  const auto z = embed({{1, 0}}, {{1, 0}, {-1, 0}});
  const auto batch = data::make_batch({{0, 0}}, {{0, 1}}, 1);
  EXPECT_NEAR(bpr_loss(batch, z), std::log1p(std::exp(-2.0)), 1e-15);
  EXPECT_LT(std::log1p(std::exp(-20.0)), 1e-8);
}

TEST(BprGrad, MatchesFiniteDifferences) {
  auto rng = make_stream(18, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto z = testing::random_embeddings(5, 7, 4, rng);
    const auto batch = testing::random_batch(5, 7, 3, 2, rng);
    double value = 0.0;
    const auto g = bpr_grad(batch, z, &value);
    EXPECT_NEAR(value, testing::oracle::bpr(batch, z), 1e-12);
    const double err = worst_fd_error(densify(g, z), z, [&](const encoder::Embeddings& zz) {
      return testing::oracle::bpr(batch, zz);
    });
    EXPECT_LT(err, 1e-6) << "trial " << trial;
  }
}

TEST(Normalize, ZeroVectorThrows) {
  const std::vector<double> zero(3, 0.0);
  EXPECT_THROW(l2_normalize(zero), NumericError);
}

TEST(Weights, InterestOutsideUnitIntervalRejected) {
  const std::vector<double> bad{0.5, 1.5};
  EXPECT_THROW(weights_from_interest(bad), std::invalid_argument);
}

}  // namespace
}  // namespace qgrace::loss
