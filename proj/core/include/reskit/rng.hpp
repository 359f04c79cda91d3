#pragma once

#include <cstdint>

namespace reskit {

// Counter-based PRNG built on the SplitMix64 finalizer (Steele, Lea & Vigna,
// "Fast splittable pseudorandom number generators", OOPSLA 2014). The state
// is a plain 64-bit counter advanced by the golden-gamma constant and pushed
// through the avalanche mixer, so the generator is pure integer arithmetic
// and produces the same stream on every platform. Substreams are derived by
// hashing (seed, id...) key material, which keeps ensemble members, EKI
// iterations and worker threads statistically independent while remaining
// reproducible for a fixed top-level seed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : state_(seed) {}

  // Derived stream for (seed, a[, b[, c]]); used as stream(seed, member) or
  // stream(seed, iteration, member).
  static CounterRng stream(std::uint64_t seed, std::uint64_t a);
  static CounterRng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b);
  static CounterRng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                           std::uint64_t c);

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller; generates pairs and caches the second.
  double next_normal();

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace reskit
