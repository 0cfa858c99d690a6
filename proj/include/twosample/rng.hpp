#pragma once

#include <cstdint>

namespace twosample {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: output i is a pure function of (key, stream, i), so a
// replicate's draws never depend on scheduling.
class counter_rng {
 public:
  using result_type = std::uint64_t;

  explicit counter_rng(std::uint64_t key, std::uint64_t stream = 0)
      : key_(mix64(key ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return mix64(key_ + mix64(counter_++)); }

  // uniform on [0,1), 53 bits
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound) by rejection, bound > 0
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = max() - max() % bound;
    for (;;) {
      std::uint64_t v = (*this)();
      if (v < limit) return v % bound;
    }
  }

  std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// The seed is hashed before the xor with r: plain seed ^ r would make runs with
// nearby seeds share most of their replicates.
inline counter_rng replicate_stream(std::uint64_t seed, std::uint64_t r, std::uint64_t stream = 0) {
  return counter_rng(mix64(seed) ^ r, stream);
}

}  // namespace twosample
