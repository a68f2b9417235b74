#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace bdris {

using Rng = std::mt19937_64;

// SplitMix64 output function. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Child seed for stream `index` under `label`:
///   mix64(mix64(master ^ mix64(fnv1a64(label))) + index)
/// Pure function of its arguments; used for per-trial and per-purpose streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(master ^ mix64(fnv1a64(label))) + index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Circularly-symmetric CN(0, 1): real and imaginary parts N(0, 1/2).
inline std::complex<double> complex_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 0.70710678118654752440);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace bdris
