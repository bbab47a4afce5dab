#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rosanna {

/// splitmix64 mixing step; used to derive independent seeds from (seed, tag)
/// pairs so parallel streams never depend on generation order.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag ^ 0xd1b54a32d192ed03ULL));
}

inline uint64_t derive_seed(uint64_t seed, uint64_t tag1, uint64_t tag2) {
  return derive_seed(derive_seed(seed, tag1), tag2);
}

/// mt19937_64 wrapper with explicit output transforms. The std distributions
/// are implementation-defined, so sampling goes through fixed formulas to keep
/// generated data bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed)) {}

  uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform01_open_low() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard Gaussian via Box-Muller (cosine branch only, no cached spare).
  double gaussian() {
    double u1 = uniform01_open_low();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Zero-mean unit-variance uniform: [-sqrt(3), sqrt(3)).
  double uniform_unit_var() {
    return (2.0 * uniform01() - 1.0) * std::numbers::sqrt3;
  }

  /// Zero-mean unit-variance Laplace (scale 1/sqrt(2)) via inverse CDF.
  double laplace_unit_var() {
    double u = uniform01() - 0.5;
    double b = 1.0 / std::numbers::sqrt2;
    double mag = -b * std::log1p(-2.0 * std::abs(u));
    return u < 0.0 ? -mag : mag;
  }

  /// Integer in [0, bound) by rejection-free modulo of a 64-bit draw; bias is
  /// negligible for bound << 2^64.
  uint64_t below(uint64_t bound) { return engine_() % bound; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rosanna
