#pragma once

#include <cstdint>
#include <random>

namespace qgrace {

using Rng = std::mt19937_64;

/// Independent seeded stream for a named purpose (batching, VAE noise, noise
/// injection, ...). Two different stream ids never share a state sequence.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return Rng(seq);
}

namespace streams {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kEmbeddingInit = 3;
inline constexpr std::uint64_t kGeneratorInit = 4;
inline constexpr std::uint64_t kBatches = 5;
inline constexpr std::uint64_t kVaeNoise = 6;
inline constexpr std::uint64_t kSynthetic = 7;
inline constexpr std::uint64_t kDumpSubset = 8;
}  // namespace streams

}  // namespace qgrace
