#pragma once

#include <cstdint>
#include <vector>

namespace sgdsim {

// Fixed-width bit vector over 64-bit words. Used both for packing rows
// (bits over coordinates) and for samples (bits over packing rows).
struct BitVec {
  int n = 0;
  std::vector<std::uint64_t> w;

  BitVec() = default;
  explicit BitVec(int bits) : n(bits), w((bits + 63) / 64, 0) {}

  bool get(int i) const { return (w[i >> 6] >> (i & 63)) & 1; }
  void set(int i) { w[i >> 6] |= 1ull << (i & 63); }
  void clear(int i) { w[i >> 6] &= ~(1ull << (i & 63)); }

  int count() const {
    int c = 0;
    for (std::uint64_t x : w) c += __builtin_popcountll(x);
    return c;
  }

  void or_with(const BitVec& o) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] |= o.w[k];
  }
  void and_with(const BitVec& o) {
    for (std::size_t k = 0; k < w.size(); ++k) w[k] &= o.w[k];
  }

  // Number of positions set in both; exact integer arithmetic.
  int and_count(const BitVec& o) const {
    int c = 0;
    for (std::size_t k = 0; k < w.size(); ++k) c += __builtin_popcountll(w[k] & o.w[k]);
    return c;
  }

  // Lowest clear position, or -1 when full.
  int first_clear() const {
    for (std::size_t k = 0; k < w.size(); ++k) {
      std::uint64_t x = ~w[k];
      if ((k + 1) * 64 > static_cast<std::size_t>(n)) x &= (n & 63) ? ((1ull << (n & 63)) - 1) : ~0ull;
      if (x) {
        int i = static_cast<int>(k * 64) + __builtin_ctzll(x);
        return i < n ? i : -1;
      }
    }
    return -1;
  }

  // Lowest set position, or -1 when empty.
  int first_set() const {
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k]) return static_cast<int>(k * 64) + __builtin_ctzll(w[k]);
    return -1;
  }

  bool operator==(const BitVec& o) const { return n == o.n && w == o.w; }

  // Order by scanning positions upward; the first differing bit decides,
  // clear before set. Position 0 is the most significant.
  bool lex_less(const BitVec& o) const {
    for (std::size_t k = 0; k < w.size(); ++k) {
      std::uint64_t diff = w[k] ^ o.w[k];
      if (diff) {
        int b = __builtin_ctzll(diff);
        return !((w[k] >> b) & 1);
      }
    }
    return false;
  }
};

}  // namespace sgdsim
