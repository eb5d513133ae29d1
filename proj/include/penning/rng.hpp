#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace penning {

/// 64-bit finaliser of SplitMix64; a bijection with good avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64. Small, fast and splittable: streams keyed by counters are independent of
/// the order in which they are created, which keeps parallel sampling reproducible.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Generator for the stream labelled (seed, a, b), e.g. (seed, step, ion).
inline SplitMix64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
  h = mix64(h ^ (a + 0x13198a2e03707344ULL));
  h = mix64(h ^ (b + 0xa4093822299f31d0ULL));
  return SplitMix64(h);
}

/// Isotropic unit vector: uniform cos(theta) and azimuth.
inline Eigen::Vector3d random_unit_vector(SplitMix64& rng) {
  const double c = 2.0 * rng.uniform() - 1.0;
  const double phi = 6.283185307179586 * rng.uniform();
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return {s * std::cos(phi), s * std::sin(phi), c};
}

}  // namespace penning
