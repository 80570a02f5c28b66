#include "sgdsim/packing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sgdsim/errors.hpp"
#include "sgdsim/rng.hpp"

namespace sgdsim {

double PackingSet::coord(int row, int i) const {
  if (kind == PackingKind::Binary716) return rows[row].get(i) ? 1.0 : 0.0;
  double s = 1.0 / std::sqrt(static_cast<double>(d));
  return rows[row].get(i) ? s : -s;
}

namespace {

BitVec draw_binary716(int d, int ones, std::vector<int>& pool, Rng& rng) {
  std::iota(pool.begin(), pool.end(), 0);
  BitVec row(d);
  for (int j = 0; j < ones; ++j) {
    int r = j + static_cast<int>(rng.below(static_cast<std::uint64_t>(d - j)));
    std::swap(pool[j], pool[r]);
    row.set(pool[j]);
  }
  return row;
}

BitVec draw_signed(int d, Rng& rng) {
  BitVec row(d);
  for (std::size_t k = 0; k < row.w.size(); ++k) row.w[k] = rng.u64();
  int rem = d & 63;
  if (rem) row.w.back() &= (1ull << rem) - 1;
  return row;
}

bool admissible(const PackingSet& set, const BitVec& cand, int d) {
  if (set.kind == PackingKind::Binary716) {
    int cap = 5 * d / 16;
    for (const BitVec& r : set.rows)
      if (r.and_count(cand) > cap) return false;
  } else {
    int lo = 7 * d / 16, hi = 9 * d / 16;
    for (const BitVec& r : set.rows) {
      int common = r.and_count(cand);
      int agree = d - r.count() - cand.count() + 2 * common;
      if (agree < lo || agree > hi) return false;
    }
  }
  return true;
}

}  // namespace

PackingSet generate_packing(PackingKind kind, int d, int m, std::uint64_t seed,
                            long long max_attempts) {
  if (d < 16 || d % 16 != 0)
    throw DimensionMismatch("packing dimension must be a positive multiple of 16, got " +
                            std::to_string(d));
  if (m < 1) throw OutOfRange("packing needs at least one vector");
  if (max_attempts < 1) throw OutOfRange("max_attempts must be positive");

  PackingSet set;
  set.kind = kind;
  set.d = d;
  set.seed = seed;

  Rng rng(seed, kStreamPacking);
  std::vector<int> pool(d);
  int ones = 7 * d / 16;

  int restarts = 0;
  long long attempts_this_row = 0;
  while (set.m() < m) {
    BitVec cand = kind == PackingKind::Binary716 ? draw_binary716(d, ones, pool, rng)
                                                 : draw_signed(d, rng);
    ++attempts_this_row;
    if (admissible(set, cand, d)) {
      set.rows.push_back(std::move(cand));
      attempts_this_row = 0;
    } else if (attempts_this_row >= max_attempts) {
      set.rows.clear();
      attempts_this_row = 0;
      if (++restarts > kMaxFamilyRestarts)
        throw AttemptsExhausted("packing " + to_string(kind) + " d=" + std::to_string(d) +
                                " m=" + std::to_string(m) + ": budget exhausted after " +
                                std::to_string(kMaxFamilyRestarts) + " family restarts");
    }
  }

  std::sort(set.rows.begin(), set.rows.end(),
            [](const BitVec& a, const BitVec& b) { return a.lex_less(b); });
  return set;
}

PackingReport verify_packing(const PackingSet& set) {
  PackingReport rep;
  int d = set.d, m = set.m();
  if (set.kind == PackingKind::Binary716) {
    rep.pair_bound_lo = 0;
    rep.pair_bound_hi = 5 * d / 16;
    int ones = 7 * d / 16;
    for (int a = 0; a < m; ++a)
      if (set.rows[a].count() != ones) rep.bad_rows.push_back(a);
  } else {
    rep.pair_bound_lo = 7 * d / 16;
    rep.pair_bound_hi = 9 * d / 16;
  }

  bool first = true;
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      int stat = set.pair_stat(a, b);
      if (first || stat < rep.pair_min) rep.pair_min = stat;
      if (first || stat > rep.pair_max) rep.pair_max = stat;
      first = false;
      ++rep.pairs_checked;
      if (stat < rep.pair_bound_lo || stat > rep.pair_bound_hi)
        rep.violations.push_back({a, b, stat});
    }
  }
  rep.ok = rep.violations.empty() && rep.bad_rows.empty();
  return rep;
}

void save_packing(const PackingSet& set, std::ostream& out) {
  out << to_string(set.kind) << ' ' << set.d << ' ' << set.m() << ' ' << set.seed << '\n';
  for (const BitVec& r : set.rows) {
    std::string line(static_cast<std::size_t>(set.d), '0');
    for (int i = 0; i < set.d; ++i)
      line[static_cast<std::size_t>(i)] =
          set.kind == PackingKind::Binary716 ? (r.get(i) ? '1' : '0') : (r.get(i) ? '+' : '-');
    out << line << '\n';
  }
  if (!out) throw IoError("failed writing packing");
}

void save_packing(const PackingSet& set, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  save_packing(set, f);
}

PackingSet load_packing(std::istream& in) {
  PackingSet set;
  std::string kind_name;
  int m = 0;
  if (!(in >> kind_name >> set.d >> m >> set.seed))
    throw IoError("malformed packing header");
  set.kind = packing_kind_from(kind_name);
  std::string line;
  std::getline(in, line);  // finish the header line
  set.rows.reserve(static_cast<std::size_t>(m));
  for (int v = 0; v < m; ++v) {
    if (!std::getline(in, line) || static_cast<int>(line.size()) != set.d)
      throw IoError("packing row " + std::to_string(v) + " malformed");
    BitVec r(set.d);
    for (int i = 0; i < set.d; ++i) {
      char c = line[static_cast<std::size_t>(i)];
      bool bit = set.kind == PackingKind::Binary716 ? c == '1' : c == '+';
      bool ok = set.kind == PackingKind::Binary716 ? (c == '0' || c == '1')
                                                   : (c == '-' || c == '+');
      if (!ok) throw IoError("packing row " + std::to_string(v) + " has bad character");
      if (bit) r.set(i);
    }
    set.rows.push_back(std::move(r));
  }
  return set;
}

PackingSet load_packing(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load_packing(f);
}

std::string to_string(PackingKind kind) {
  return kind == PackingKind::Binary716 ? "Binary716" : "SignedEighth";
}

PackingKind packing_kind_from(const std::string& name) {
  if (name == "Binary716") return PackingKind::Binary716;
  if (name == "SignedEighth") return PackingKind::SignedEighth;
  throw ConfigError("unknown packing kind: " + name);
}

}  // namespace sgdsim
