#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace icp {

/// SplitMix64, the java.util.SplittableRandom mixer.
/// Reference implementation: https://prng.di.unimi.it/splitmix64.c
///
/// Used as the toolkit-wide generator because the integer stream is defined
/// purely by 64-bit arithmetic, so index shuffles (and therefore data splits)
/// reproduce bit-for-bit on every platform. Floating-point draws are exact
/// functions of the integer stream; normal draws additionally go through
/// libm (log/sin/cos) and are reproducible per platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Unbiased uniform integer in [0, bound), bound >= 1. Rejection sampling
  /// on the top of the range, arc4random_uniform style.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0ull - bound) % bound;  // 2^64 mod bound
    std::uint64_t x = next();
    while (x < threshold) x = next();
    return x % bound;
  }

  /// Standard normal via Box-Muller. The transform yields a pair; the second
  /// value is cached, so draws consume one uniform pair per two normals.
  double next_normal() noexcept {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void shuffle(std::vector<T>& values, SplitMix64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace icp
