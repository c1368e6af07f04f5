#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace aging {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent substream owned by (trial, bs). Distinct
/// (trial, bs) pairs with bs < 256 map to distinct seeds for a fixed master.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t trial,
                                       std::uint64_t bs = 0) noexcept {
  const std::uint64_t key = (trial << 8) | (bs & 0xffU);
  return splitmix64(splitmix64(master) ^ key);
}

inline Rng make_substream(std::uint64_t master, std::uint64_t trial, std::uint64_t bs = 0) {
  return Rng(substream_seed(master, trial, bs));
}

/// CN(0, variance) sampler: independent real and imaginary parts with
/// variance/2 each.
class ComplexNormal {
 public:
  std::complex<double> operator()(Rng& rng, double variance = 1.0) {
    const double s = std::sqrt(0.5 * variance);
    const double re = gauss_(rng);
    const double im = gauss_(rng);
    return {s * re, s * im};
  }

 private:
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace aging
