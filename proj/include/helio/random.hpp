// Seeded random helpers with platform-independent output.
#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <utility>

namespace helio {

using Rng = std::mt19937_64;

/// Uniform in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via Box-Muller (one draw discarded, keeps the stream simple).
inline double normal01(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Uniform integer in [0, n).
inline std::uint64_t below(Rng& rng, std::uint64_t n) { return static_cast<std::uint64_t>(uniform01(rng) * n); }

/// Fisher-Yates shuffle driven by `below`, identical across standard libraries.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = below(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace helio
