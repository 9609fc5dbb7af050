#pragma once

// Planted-preference data: users and items get Gaussian latent factors and
// the highest-affinity pairs (global quantile) become the interactions.

#include <cstddef>
#include <cstdint>

#include "qgrace/dataset.hpp"
#include "qgrace/matrix.hpp"

namespace qgrace::synth {

struct PlantedSpec {
  std::size_t num_users = 200;
  std::size_t num_items = 300;
  std::size_t rank = 8;
  double positive_fraction = 0.05;  // top share of all M*N affinities
};

struct PlantedData {
  data::InteractionDataset dataset;  // raw ids "u<k>" / "i<k>"
  Matrix user_factors;               // M x rank
  Matrix item_factors;               // N x rank
};

/// Users and items without any positive are still listed so that indices
/// match the factor rows.
PlantedData planted_preference(const PlantedSpec& spec, std::uint64_t seed);

}  // namespace qgrace::synth
