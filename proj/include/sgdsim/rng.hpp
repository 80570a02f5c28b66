#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace sgdsim {

// Counter-based generator built on the SplitMix64 finalizer (Steele, Lea,
// Flood 2014). All draws are pure functions of (seed, stream, counter), so
// trials can be sharded across threads in any order and still reproduce
// bit-identically. Constants:
//   weyl increment 0x9E3779B97F4A7C15
//   mix multipliers 0xBF58476D1CE4E5B9, 0x94D049BB133111EB
// The k-th output of stream s under seed x is
//   mix(key + (k+1) * weyl),  key = mix(mix(x + weyl) + mix(s * weyl + 1)).
inline constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(mix64(seed + kWeyl) + mix64(stream * kWeyl + 1))), ctr_(0) {}

  std::uint64_t u64() { return mix64(key_ + (++ctr_) * kWeyl); }

  // 53-bit mantissa uniform in [0, 1).
  double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return real01() < p; }

  // Unbiased integer in [0, bound) via masked rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    std::uint64_t mask = ~0ull >> __builtin_clzll((bound - 1) | 1);
    for (;;) {
      std::uint64_t r = u64() & mask;
      if (r < bound) return r;
    }
  }

  // One Box-Muller value per call; the sine branch is discarded to keep the
  // draw count a pure function of the call count.
  double gaussian() {
    double u1 = 0.0;
    while (u1 == 0.0) u1 = real01();
    double u2 = real01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Child generator for a derived task (per-trial splitting).
  Rng fork(std::uint64_t stream) const {
    Rng r(0, 0);
    r.key_ = mix64(key_ + mix64(stream * kWeyl + 1));
    r.ctr_ = 0;
    return r;
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

// Fixed stream ids so independent stages never share a counter sequence.
enum : std::uint64_t {
  kStreamPacking = 1,
  kStreamDataset = 2,
  kStreamSchedule = 3,
  kStreamProbes = 4,
  kStreamBaseline = 5,
  kStreamCoupon = 6,
};

}  // namespace sgdsim
