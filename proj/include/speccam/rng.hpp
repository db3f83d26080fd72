#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace speccam {

/// Seedable generator whose output is identical on every platform.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// uniform and normal draws are derived here directly from the raw 64-bit
/// words: uniform() takes the top 53 bits, normal() uses the Box-Muller
/// transform and caches the second variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mean + stddev * r * std::cos(a);
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace speccam
