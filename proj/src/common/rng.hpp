#pragma once

#include <cmath>
#include <cstdint>

namespace srdet {

// Stream derivation is done with splitmix64 so that (seed, tag, index) tuples
// map to independent generators; this keeps shuffling, augmentation and weight
// init reproducible regardless of worker count or resume point.
inline uint64_t splitmix64_next(uint64_t& s) {
  uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
  uint64_t s = a;
  uint64_t r = splitmix64_next(s);
  s ^= b + 0x9e3779b97f4a7c15ULL;
  r ^= splitmix64_next(s);
  s ^= c + 0xd1b54a32d192ed03ULL;
  r ^= splitmix64_next(s);
  s ^= d + 0x8cb92ba72f3d8dd7ULL;
  r ^= splitmix64_next(s);
  return r;
}

// xoshiro256++; fixed algorithm so streams are stable across platforms,
// unlike the standard distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : s_) w = splitmix64_next(s);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0,n), unbiased enough for our purposes via 128-bit scaling
  int uniform_int(int n) {
    if (n <= 1) return 0;
    return static_cast<int>((static_cast<unsigned __int128>(next()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller without a cached spare; two draws per sample.
  double normal() {
    double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace srdet
