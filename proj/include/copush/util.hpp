#pragma once

// Small shared utilities: deterministic RNG draws, stable hashing and
// float formatting. Planning code must behave identically across runs for
// a given seed, so random draws go through the helpers below instead of
// std::uniform_real_distribution (whose output is implementation-defined).

#include <cstdint>
#include <cmath>
#include <random>
#include <string>

namespace copush {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1). Uses the top 53 bits of the generator output,
/// so the mapping is fixed by the mt19937_64 stream alone.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Standard normal draw via Box-Muller (deterministic given the stream).
inline double gaussian(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

/// FNV-1a over a byte range; used for object signatures and scenario hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t seed = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_add(std::uint64_t h, double v) {
  // Hash a double through a fixed-precision decimal rounding so that
  // signatures are insensitive to sub-micro noise in vertex coordinates.
  long long q = llround(v * 1e6);
  return fnv1a(&q, sizeof(q), h);
}

std::string hex_string(std::uint64_t h);

}  // namespace copush
