#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgdsim/bitvec.hpp"

namespace sgdsim {

// Two families of near-orthogonal vectors over a 16-divisible dimension d:
//   Binary716     u in {0,1}^d with exactly 7d/16 ones; pairwise <u,v> <= 5d/16.
//   SignedEighth  u in {+-1/sqrt(d)}^d; pairwise agreement count within d/16 of d/2.
// Rows are stored as bit masks (set bit = entry 1, resp. +1/sqrt(d)) and kept
// in lexicographic order, position 0 most significant, clear < set.
enum class PackingKind { Binary716, SignedEighth };

struct PackingSet {
  PackingKind kind = PackingKind::Binary716;
  int d = 0;
  std::uint64_t seed = 0;
  std::vector<BitVec> rows;

  int m() const { return static_cast<int>(rows.size()); }
  bool bit(int row, int i) const { return rows[row].get(i); }

  // Coordinate value of a row: 0/1 or +-1/sqrt(d).
  double coord(int row, int i) const;

  // Integer pairwise statistic: dot product of 0/1 rows, or agreement count
  // for signed rows.
  int pair_stat(int a, int b) const {
    int common = rows[a].and_count(rows[b]);
    if (kind == PackingKind::Binary716) return common;
    int ones_a = rows[a].count(), ones_b = rows[b].count();
    // agreements = matching bits = d - |xor|; |xor| = ones_a + ones_b - 2*common.
    return d - ones_a - ones_b + 2 * common;
  }
};

// Rejection sampling: each row gets up to max_attempts candidate draws; when
// a row's budget is exhausted the whole family restarts from scratch, up to
// kMaxFamilyRestarts times, after which AttemptsExhausted is thrown. The
// result is a pure function of (kind, d, m, seed, max_attempts).
inline constexpr int kMaxFamilyRestarts = 16;

PackingSet generate_packing(PackingKind kind, int d, int m, std::uint64_t seed,
                            long long max_attempts = 100000);

struct PackingReport {
  bool ok = false;
  int pair_min = 0;   // smallest pairwise statistic seen
  int pair_max = 0;   // largest
  int pair_bound_lo = 0;  // admissible range for the statistic
  int pair_bound_hi = 0;
  long long pairs_checked = 0;
  // rows whose ones count is wrong (Binary716 only)
  std::vector<int> bad_rows;
  // offending pairs as {a, b, stat}
  std::vector<std::array<int, 3>> violations;
};

// Re-derives every pairwise statistic in exact integer arithmetic.
PackingReport verify_packing(const PackingSet& set);

// Plain text: header "kind d m seed", then one row per line as 0/1 or -/+
// characters. Round-trips bit-exactly.
void save_packing(const PackingSet& set, std::ostream& out);
void save_packing(const PackingSet& set, const std::string& path);
PackingSet load_packing(std::istream& in);
PackingSet load_packing(const std::string& path);

std::string to_string(PackingKind kind);
PackingKind packing_kind_from(const std::string& name);

}  // namespace sgdsim
