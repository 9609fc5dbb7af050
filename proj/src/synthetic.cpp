#include "qgrace/synthetic.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

#include "qgrace/random.hpp"

namespace qgrace::synth {

PlantedData planted_preference(const PlantedSpec& spec, std::uint64_t seed) {
  if (spec.num_users == 0 || spec.num_items == 0 || spec.rank == 0) {
    throw std::invalid_argument("planted_preference: sizes must be >= 1");
  }
  if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0)) {
    throw std::invalid_argument("planted_preference: positive_fraction must be in (0,1)");
  }
  auto rng = make_stream(seed, streams::kSynthetic);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PlantedData out{{}, Matrix(spec.num_users, spec.rank), Matrix(spec.num_items, spec.rank)};
  for (auto& v : out.user_factors.flat()) v = gauss(rng);
  for (auto& v : out.item_factors.flat()) v = gauss(rng);

  const auto m = spec.num_users;
  const auto n = spec.num_items;
  std::vector<double> affinity(m * n);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t i = 0; i < n; ++i) {
      affinity[u * n + i] = dot(out.user_factors.row(u), out.item_factors.row(i));
    }
  }
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(spec.positive_fraction * static_cast<double>(m * n)));
  auto sorted = affinity;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(m * n - count),
                   sorted.end());
  const double threshold = sorted[m * n - count];

  auto& ds = out.dataset;
  for (std::size_t u = 0; u < m; ++u) ds.users.intern("u" + std::to_string(u));
  for (std::size_t i = 0; i < n; ++i) ds.items.intern("i" + std::to_string(i));
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t i = 0; i < n; ++i) {
      if (affinity[u * n + i] >= threshold) {
        ds.edges.push_back({static_cast<data::Index>(u), static_cast<data::Index>(i)});
      }
    }
  }
  return out;
}

}  // namespace qgrace::synth
