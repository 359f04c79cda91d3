#include "reskit/rng.hpp"

#include <cmath>
#include <numbers>

namespace reskit {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

CounterRng CounterRng::stream(std::uint64_t seed, std::uint64_t a) {
  return CounterRng(mix(seed + kGoldenGamma) ^ mix(a + 2 * kGoldenGamma));
}

CounterRng CounterRng::stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return stream(mix(seed + kGoldenGamma) ^ mix(a + 2 * kGoldenGamma), b);
}

CounterRng CounterRng::stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return stream(mix(seed + kGoldenGamma) ^ mix(a + 2 * kGoldenGamma), b, c);
}

std::uint64_t CounterRng::next_u64() {
  state_ += kGoldenGamma;
  return mix(state_);
}

double CounterRng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::next_below(std::uint64_t n) {
  // Rejection-free mapping is biased for huge n; all call sites use small n
  // (cluster counts, sample counts) where the bias is < 2^-40.
  return next_u64() % n;
}

double CounterRng::next_normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(t);
  has_cached_ = true;
  return r * std::cos(t);
}

}  // namespace reskit
