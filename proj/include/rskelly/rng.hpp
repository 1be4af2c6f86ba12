#pragma once

#include <cstdint>

namespace rskelly {

/// SplitMix64 (Steele, Lea, Flood 2014). The state advances by the golden-ratio
/// increment and each output is the state passed through a 64-bit finalizer.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t next() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in (0, 1]; 53 random bits, never exactly zero.
  constexpr double uniform_open_closed() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform double in [0, 1).
  constexpr double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Counter-based stream layout: sample `index` of a run seeded with `seed` draws
/// from its own SplitMix64 whose initial state is mix(seed ^ mix(index + 1)).
/// Any partition of the index range therefore reproduces the same draws.
constexpr SplitMix64 stream_for(std::uint64_t seed, std::uint64_t index) noexcept {
  return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(index + 1)));
}

}  // namespace rskelly
