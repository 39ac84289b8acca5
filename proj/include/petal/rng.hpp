#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace petal {

/// 64-bit linear congruential generator (Knuth's MMIX constants).
///
///   state' = state * 6364136223846793005 + 1442695040888963407  (mod 2^64)
///
/// The seed is mixed once through the same step so that seeds 0, 1, 2, ...
/// do not start from adjacent states. Outputs are the high 53 bits for
/// doubles and a rejection-sampled high-bit draw for bounded integers, so a
/// given seed yields the same stream on every platform.
class Lcg64 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit constexpr Lcg64(std::uint64_t seed) : state_(seed) { next(); }

  constexpr std::uint64_t next() {
    state_ = state_ * kMultiplier + kIncrement;
    return state_;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    // Reject the top partial bucket to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw = 0;
    do {
      // High bits of an LCG are the well-mixed ones.
      const std::uint64_t hi = next() >> 32;
      const std::uint64_t lo = next() >> 32;
      draw = (hi << 32) | lo;
    } while (draw >= limit);
    return draw % bound;
  }

  /// Standard normal via Box-Muller; one draw per call (the sine partner is
  /// discarded to keep the stream position a pure function of call count).
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace petal
