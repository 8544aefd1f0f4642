#pragma once

#include <cstdint>
#include <limits>

namespace peerimport {

// Counter-based random stream: the state is derived from (seed, tags...) so
// any (firm, origin, year, purpose) cell gets the same draws regardless of
// evaluation order or worker count. SplitMix64 output function.
class Stream {
 public:
  using result_type = std::uint64_t;

  template <typename... Tags>
  explicit Stream(std::uint64_t seed, Tags... tags) : state_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {
    ((state_ = mix(state_ ^ (static_cast<std::uint64_t>(tags) + 0x9e3779b97f4a7c15ULL))), ...);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace peerimport
