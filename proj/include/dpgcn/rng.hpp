#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "dpgcn/errors.hpp"

namespace dpgcn {

// All randomness flows through explicitly seeded streams. A root seed plus a
// (purpose, index) pair deterministically names one stream, so the m
// subsample trials and the Laplace noise draw each own disjoint randomness
// and parallel execution reproduces the serial result bit for bit.

enum class StreamPurpose : std::uint64_t {
  kSubsample = 1,
  kNoise = 2,
  kSbm = 3,
  kTrial = 4,
  kAuditG = 5,
  kAuditGPrime = 6,
  kRestart = 7,
};

namespace detail {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline std::uint64_t derive_seed(std::uint64_t root, StreamPurpose purpose,
                                 std::uint64_t index) {
  std::uint64_t h = detail::mix64(root);
  h = detail::mix64(h ^ static_cast<std::uint64_t>(purpose));
  h = detail::mix64(h ^ index);
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  RngStream(std::uint64_t root, StreamPurpose purpose, std::uint64_t index)
      : engine_(derive_seed(root, purpose, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) from the high 53 bits; identical across platforms,
  // unlike std::uniform_real_distribution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Inverse-CDF draw from Laplace(0, scale):
  // u uniform on (-1/2, 1/2), return -scale * sign(u) * ln(1 - 2|u|).
  double laplace(double scale) {
    if (!(scale > 0.0)) throw validation_error("laplace: scale must be > 0");
    double u;
    do {
      u = uniform01() - 0.5;
    } while (u == -0.5);
    if (u == 0.0) return 0.0;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -scale * sign * std::log1p(-2.0 * std::fabs(u));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dpgcn
