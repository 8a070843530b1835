#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace mrfmle {

// Seed with an explicit substream id. Identical (seed, stream) pairs reproduce
// identical draws bit-for-bit on a given build.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  // Derived substream: same base seed, shifted stream id.
  RngSeed sub(std::uint64_t offset) const { return RngSeed{seed, stream + offset}; }
};

namespace detail {
// SplitMix64 step; used only to whiten (seed, stream) into engine state.
inline std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic RNG. The transforms below (53-bit uniforms, Box-Muller
// normals, index draws) are written out explicitly instead of using
// std::*_distribution because the standard leaves those algorithms
// implementation-defined, which would break the reproducibility contract
// across standard libraries.
class Rng {
 public:
  explicit Rng(RngSeed s) {
    std::uint64_t state = s.seed;
    std::uint64_t a = detail::splitmix64(state);
    state ^= 0xD1B54A32D192ED03ull * (s.stream + 1);
    std::uint64_t b = detail::splitmix64(state);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    eng_.seed(seq);
  }

  // Uniform double in [0, 1), 53 bits of mantissa.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard the log against an exact zero draw.
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform index in [0, k).
  int uniform_int(int k) {
    int v = static_cast<int>(uniform01() * static_cast<double>(k));
    return v >= k ? k - 1 : v;
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mrfmle
