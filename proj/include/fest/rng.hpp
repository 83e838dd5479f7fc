#pragma once

// Deterministic random number generation for reproducible synthesis.
//
// The integer stream is SplitMix64: the whole generator state is one 64-bit
// word and the output sequence is fixed by the algorithm alone, so results
// do not depend on any library's distribution internals. Gaussian variates
// are produced by the Box-Muller transform on top of that stream (two
// uniforms consumed per variate, cosine branch only).

#include <cmath>
#include <cstdint>

namespace fest {

/// SplitMix64 finalizer. Used on its own to derive independent child seeds,
/// e.g. per-case seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  /// Uniform integer in [lo, hi], both inclusive.
  int next_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
    return lo + static_cast<int>(next_u64() % span);
  }

  /// Box-Muller, cosine branch. Consumes exactly two uniforms.
  double next_gaussian(double mean, double sigma) {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // log(0) guard
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * (r * std::cos(two_pi * u2));
  }

 private:
  std::uint64_t state_;
};

}  // namespace fest
