#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace normscaler {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a over the bytes of a string, used to key experiments by name.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based 64-bit generator: the i-th draw of stream `key` is
/// mix64(key + i * golden_gamma), so any draw is addressable without
/// replaying the stream.
///
/// Gaussians use the basic (trigonometric) Box-Muller transform on two
/// consecutive 53-bit uniforms in (0, 1]; both outputs of a pair are used,
/// cosine branch first.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in (0, 1].
  double next_uniform() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_gaussian() noexcept {
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

  /// Independent substream; same parent key and tag always give the same child.
  CounterRng split(std::uint64_t tag) const noexcept {
    return CounterRng(mix64(key_ ^ mix64(tag + 0x5851F42D4C957F2DULL)));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Seed of trial `trial` in experiment `experiment`: base ^ hash(experiment, trial).
constexpr std::uint64_t trial_seed(std::uint64_t base_seed, std::string_view experiment,
                                   std::uint64_t trial) noexcept {
  return base_seed ^ mix64(fnv1a64(experiment) ^ mix64(trial));
}

}  // namespace normscaler
