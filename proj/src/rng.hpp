#pragma once

#include <cstdint>
#include <random>

namespace coevo {

using Rng = std::mt19937_64;

/// Independent stream for replica `index` of an ensemble seeded with `master`.
/// Streams depend only on (master, index), never on scheduling order.
inline Rng make_stream(std::uint64_t master, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x636f65u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace coevo
