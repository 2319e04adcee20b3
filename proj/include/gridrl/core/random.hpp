#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>

#include "gridrl/core/errors.hpp"

namespace gridrl {

// mt19937_64 is fully specified by the standard, and the helpers below only
// consume raw 64-bit draws, so seeded streams are identical on every platform.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw ParameterError("uniform_index: empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % range + 1) % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return static_cast<std::size_t>(x % range);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Index drawn from an unnormalized-safe probability vector. The last
/// positive entry absorbs round-off so the result is always valid.
inline std::size_t sample_discrete(Rng& rng, std::span<const double> probs) {
  if (probs.empty()) throw ParameterError("sample_discrete: empty distribution");
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_positive;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace gridrl
