#pragma once

// Counter-based random streams. Every stream is addressed by a
// (seed, purpose, a, b) key, so any consumer can re-derive exactly the
// stream it needs without sharing mutable state. Switching the render
// mode or the thread count therefore cannot desynchronize draws.

#include <cstdint>

namespace cqfield {

namespace rng_purpose {
inline constexpr std::uint32_t kParamInit = 1;
inline constexpr std::uint32_t kBatchPixel = 2;
inline constexpr std::uint32_t kRaySamples = 3;
inline constexpr std::uint32_t kMonitorSelect = 4;
inline constexpr std::uint32_t kProbeSamples = 5;
inline constexpr std::uint32_t kMeshSample = 6;
inline constexpr std::uint32_t kTest = 99;
} // namespace rng_purpose

// SplitMix64 finalizer; full-avalanche 64-bit mix.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t purpose, std::uint64_t a = 0,
             std::uint64_t b = 0)
      : key_(mix64(mix64(mix64(seed ^ (std::uint64_t(purpose) << 32)) ^ a) ^ b)) {}

  std::uint64_t next_u64() { return mix64(key_ ^ (counter_++ * 0xd1342543de82ef95ull)); }

  // Uniform in [0, 1), 53 significant bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform in [0, n); n must be > 0. Uses rejection to stay unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0ull - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (fresh pair each call, no cached state).
  double next_normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

} // namespace cqfield

#include <cmath>

namespace cqfield {

inline double CounterRng::next_normal() {
  double u1 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  const double u2 = next_double();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

} // namespace cqfield
