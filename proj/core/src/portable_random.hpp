#pragma once

// std:: distributions are implementation-defined, so the same seed gives
// different draws under different standard libraries. The engine is fully
// specified; these two draws are built on it directly.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace veml::detail {

// Uniform in [0, n) by rejection, no modulo bias. n > 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform in (0, 1] from the top 53 bits.
inline double unit_open_closed(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Standard normal by Box-Muller, caching the second value.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(unit_open_closed(rng_)));
    const double theta = 2.0 * std::numbers::pi * unit_open_closed(rng_);
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace veml::detail
