#pragma once

#include <cstdint>

namespace gamedp {

// SplitMix64 stream. One independent stream per (seed, domain, index)
// triple, so parallel consumers never share generator state and results
// do not depend on scheduling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum class RngDomain : std::uint64_t {
  McPath = 1,
  Deviation = 2,
  LatticeGen = 3,
  ParamGen = 4,
};

inline SplitMix64 stream_rng(std::uint64_t seed, RngDomain domain,
                             std::uint64_t index) {
  std::uint64_t s = mix64(seed ^ 0xA0761D6478BD642Full);
  s = mix64(s + (static_cast<std::uint64_t>(domain) << 56) + index);
  return SplitMix64(s);
}

}  // namespace gamedp
