#pragma once

#include <cstdint>

namespace rtvcbf {

/// SplitMix64 (Steele, Lea, Flood 2014). Used both as a stream and as a
/// counter-based hash so that draw k depends only on (seed, k).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return to_unit(next()); }

  static constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  /// Stateless draw number `counter` of stream `seed`.
  static constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t counter) {
    return mix(seed + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rtvcbf
