// Serial reference kernels against their OpenMP versions on synthetic-sized
// and larger inputs. Run with OMP_NUM_THREADS to vary the worker count.

#include <benchmark/benchmark.h>

#include <random>

#include "qgrace/encoder.hpp"
#include "qgrace/kernels.hpp"
#include "qgrace/losses.hpp"
#include "qgrace/random.hpp"
#include "qgrace/synthetic.hpp"

namespace {

using namespace qgrace;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  auto rng = make_stream(seed, 99);
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (auto& v : m.flat()) v = g(rng);
  return m;
}

Matrix unit(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto n = loss::l2_normalize(m.row(r));
    std::copy(n.begin(), n.end(), out.row(r).begin());
  }
  return out;
}

encoder::NormalizedAdjacency adjacency(std::size_t scale) {
  synth::PlantedSpec spec;
  spec.num_users *= scale;
  spec.num_items *= scale;
  const auto planted = synth::planted_preference(spec, 1);
  return encoder::normalize_adjacency(spec.num_users, spec.num_items, planted.dataset.edges);
}

template <bool Parallel>
void BM_spmm(benchmark::State& state) {
  const auto adj = adjacency(static_cast<std::size_t>(state.range(0)));
  const auto x = random_matrix(adj.csr.n, 64, 2);
  Matrix y;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::spmm(adj.csr, x, y);
    } else {
      kernels::serial::spmm(adj.csr, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_pairwise_potential(benchmark::State& state) {
  const auto x = unit(random_matrix(static_cast<std::size_t>(state.range(0)), 64, 3));
  for (auto _ : state) {
    auto p = Parallel ? kernels::parallel::pairwise_potential(x)
                      : kernels::serial::pairwise_potential(x);
    benchmark::DoNotOptimize(p.potential.data());
  }
}

template <bool Parallel>
void BM_top_k(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto users_unit = unit(random_matrix(m, 64, 4));
  const auto items_unit = unit(random_matrix(3 * m / 2, 64, 5));
  std::vector<std::uint32_t> users(m);
  std::vector<std::vector<std::uint32_t>> exclude(m);
  for (std::size_t u = 0; u < m; ++u) {
    users[u] = static_cast<std::uint32_t>(u);
    exclude[u] = {static_cast<std::uint32_t>(u % items_unit.rows())};
  }
  for (auto _ : state) {
    auto top = Parallel ? kernels::parallel::top_k(users_unit, items_unit, users, exclude, 20)
                        : kernels::serial::top_k(users_unit, items_unit, users, exclude, 20);
    benchmark::DoNotOptimize(top.data());
  }
}

}  // namespace

BENCHMARK(BM_spmm<false>)->Arg(1)->Arg(8);
BENCHMARK(BM_spmm<true>)->Arg(1)->Arg(8);
BENCHMARK(BM_pairwise_potential<false>)->Arg(128)->Arg(512);
BENCHMARK(BM_pairwise_potential<true>)->Arg(128)->Arg(512);
BENCHMARK(BM_top_k<false>)->Arg(200)->Arg(2000);
BENCHMARK(BM_top_k<true>)->Arg(200)->Arg(2000);

BENCHMARK_MAIN();
