#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

namespace cvxreg {

/// SplitMix64 pseudo-random generator (Steele, Lea & Flood 2014).
///
/// Chosen over std::mt19937 so that fold splits and synthetic fixtures are
/// reproducible bit-for-bit from the documented algorithm in any language.
/// Test vectors for seed 1234567 are frozen in the unit tests.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in the open interval (0, 1): (k + 0.5) / 2^53.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) via modulo reduction.
  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

  /// Standard normal via Box-Muller; the paired value is cached.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  /// Fisher-Yates shuffle; j = next_u64() % (i + 1).
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// SplitMix64 finalizer, usable as a standalone 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent child stream k of a master seed.
///
/// Replications own stream (seed, k) so that serial and parallel runs of an
/// experiment produce identical reports.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t k) {
  return SplitMix64(mix64(seed ^ (0xd1b54a32d192ed03ULL * (k + 1))));
}

}  // namespace cvxreg
