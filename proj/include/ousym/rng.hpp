#pragma once

// Counter-based random numbers: every draw is a pure function of its key, so
// a Wiener increment depends only on (seed, path, process, step).

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ousym::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                             std::uint64_t d) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x3c6ef372fe94f82bULL));
  h = splitmix64(h ^ (c + 0xa54ff53a5f1d36f1ULL));
  h = splitmix64(h ^ (d + 0x510e527fade682d1ULL));
  return h;
}

/// Uniform on (0, 1]; 53 random bits.
constexpr double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                         std::uint64_t d) {
  return (static_cast<double>(hash(seed, a, b, c, d) >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two independent keyed uniforms.
inline double normal(std::uint64_t seed, std::uint64_t path, std::uint64_t process,
                     std::uint64_t step) {
  const double u1 = uniform(seed, path, process, step, 0);
  const double u2 = uniform(seed, path, process, step, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ousym::rng
