#pragma once

// Counter-based pseudo-random stream: the k-th output is a SplitMix64-style
// bit mix of (key + k * golden gamma). The mapping is pure 64-bit integer
// arithmetic, so a given seed reproduces the same stream on any platform.
// Gaussian variates come from Box-Muller pairs on the uniform stream.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tlphase {

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Independent stream key for a numbered stage of a larger computation.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t stage) {
  return mix64(seed ^ mix64((stage + 1) * kGoldenGamma));
}

// Per-trial seed: master seed advanced by the trial index.
inline std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t index) {
  return mix64(master_seed + (index + 1) * kGoldenGamma);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGoldenGamma); }

  // Uniform on (0, 1]; never 0 so logarithms are safe.
  double next_uniform() {
    return ((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tlphase
