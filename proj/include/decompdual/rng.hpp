#pragma once

#include <cstdint>

namespace decompdual {

// SplitMix64 (Steele/Lea/Flood). Counter-based: the state advances by a
// fixed gamma and the output is a bijective finalizer of the counter, so a
// (seed, draw-index) pair fully determines every value. Instance generators
// rely on this for bit-exact reproducibility; the constants below are part
// of the file-format contract and must not change.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double nextDouble() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0,n). Lemire multiply-shift reduction, no rejection;
  // the (negligible) bias is acceptable and keeps the stream position
  // independent of n.
  std::uint64_t nextBelow(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * nextDouble(); }

 private:
  std::uint64_t state_;
};

}  // namespace decompdual
