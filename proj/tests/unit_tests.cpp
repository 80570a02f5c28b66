#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sgdsim/bitvec.hpp"
#include "sgdsim/construction.hpp"
#include "sgdsim/errors.hpp"
#include "sgdsim/harness.hpp"
#include "sgdsim/instance.hpp"
#include "sgdsim/optimizer.hpp"
#include "sgdsim/oracle.hpp"
#include "sgdsim/packing.hpp"
#include "sgdsim/rng.hpp"
#include "sgdsim/version.hpp"
#include "support/reference.hpp"

using namespace sgdsim;

namespace {

BitVec bits(int m, std::initializer_list<int> on) {
  BitVec b(m);
  for (int i : on) b.set(i);
  return b;
}

void apply_sparse(Vec& w, const SparseGrad& g, double eta) {
  for (const auto& [i, x] : g.entries) w[i] -= eta * x;
}

// Searches dataset seeds until the multipass good event holds over the
// cyclic prefix 0,1,...,n-1,0,... of length tau_epoch.
struct FoundEvent {
  Dataset data;
  EventInfo ev;
  std::uint64_t seed = 0;
};

FoundEvent find_multipass_event(const ConstructionParams& p, int m, double delta,
                                std::uint64_t base, int budget) {
  std::vector<int> prefix;
  for (int t = 0; t < p.tau_epoch; ++t) prefix.push_back(t % p.n);
  for (int s = 0; s < budget; ++s) {
    Dataset data = sample_dataset(m, p.n, delta, base + static_cast<std::uint64_t>(s));
    EventInfo ev = good_event_multipass(data, prefix, p.tau_epoch);
    if (ev.held) return {std::move(data), ev, base + static_cast<std::uint64_t>(s)};
  }
  throw std::runtime_error("no event seed inside the search budget");
}

FoundEvent find_onepass_event(const ConstructionParams& p, int m,
                              std::uint64_t base, int budget) {
  for (int s = 0; s < budget; ++s) {
    Dataset data = sample_dataset(m, p.n, p.delta, base + static_cast<std::uint64_t>(s));
    EventInfo ev = good_event_onepass(data);
    if (ev.held) return {std::move(data), ev, base + static_cast<std::uint64_t>(s)};
  }
  throw std::runtime_error("no event seed inside the search budget");
}

// Deterministic three-coordinate gradient stream for engine cross-checks.
// Values live on a 0.02 lattice shifted by 0.011, so none of them is zero.
struct DetSource : GradientSource {
  bool dense;
  explicit DetSource(bool dn) : dense(dn) {}
  int dim() const override { return 3; }
  static double val(long long t, int c) {
    return (static_cast<double>((t * 37 + c * 61) % 101) - 50.0) / 50.0 + 0.011;
  }
  SparseGrad next(const Vec&, const std::vector<int>&, long long t) override {
    SparseGrad g;
    if (dense)
      for (int c = 0; c < 3; ++c) g.entries.push_back({c, val(t, c)});
    else {
      int c = static_cast<int>(t % 3);
      g.entries.push_back({c, val(t, c)});
    }
    return g;
  }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else cur.push_back(c);
  }
  out.push_back(cur);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- rng

TEST_CASE("rng streams replay deterministically and separate") {
  Rng a(42, 3), b(42, 3), c(42, 4);
  bool same = true, distinct = false;
  for (int i = 0; i < 64; ++i) {
    std::uint64_t x = a.u64(), y = b.u64();
    same = same && x == y;
    if (x != c.u64()) distinct = true;
  }
  CHECK(same);
  CHECK(distinct);

  Rng d(42, 3);
  Rng forked = d.fork(9);
  Rng d2(42, 3);
  bool fork_moves = false;
  for (int i = 0; i < 16; ++i)
    if (forked.u64() != d2.u64()) fork_moves = true;
  CHECK(fork_moves);

  Rng r(7, 1);
  for (int i = 0; i < 200; ++i) {
    double u = r.real01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    std::uint64_t k = r.below(13);
    CHECK(k < 13);
  }
  CHECK(r.below(1) == 0);
}

TEST_CASE("rng shuffle yields a deterministic permutation") {
  std::vector<int> v(20);
  for (int i = 0; i < 20; ++i) v[i] = i;
  Rng r(11, 2);
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) CHECK(sorted[i] == i);
  std::vector<int> v2(20);
  for (int i = 0; i < 20; ++i) v2[i] = i;
  Rng r2(11, 2);
  r2.shuffle(v2);
  CHECK(v == v2);
}

// ---------------------------------------------------------------- bitvec

TEST_CASE("bitvec operations and lexicographic order") {
  BitVec b(70);
  CHECK(b.count() == 0);
  CHECK(b.first_set() == -1);
  CHECK(b.first_clear() == 0);
  b.set(0);
  b.set(69);
  CHECK(b.count() == 2);
  CHECK(b.get(69));
  CHECK(b.first_set() == 0);
  CHECK(b.first_clear() == 1);
  b.clear(0);
  CHECK(b.first_set() == 69);

  BitVec full(70);
  for (int i = 0; i < 70; ++i) full.set(i);
  CHECK(full.first_clear() == -1);  // tail bits must stay masked
  CHECK(full.count() == 70);

  BitVec x = bits(8, {1, 3}), y = bits(8, {1, 3});
  CHECK(x == y);
  y.set(5);
  CHECK_FALSE(x == y);

  // Position 0 is most significant and a clear bit sorts first.
  CHECK(bits(8, {}).lex_less(bits(8, {0})));
  CHECK(bits(8, {1}).lex_less(bits(8, {0})));
  CHECK(bits(8, {0, 2}).lex_less(bits(8, {0, 1})));
  CHECK_FALSE(bits(8, {2}).lex_less(bits(8, {2})));

  BitVec u = bits(8, {0, 2});
  u.or_with(bits(8, {1}));
  CHECK(u.count() == 3);
  u.and_with(bits(8, {0, 1}));
  CHECK(u.count() == 2);
  CHECK(bits(8, {0, 1, 5}).and_count(bits(8, {1, 5, 6})) == 2);
}

// ---------------------------------------------------------------- packing

TEST_CASE("binary packing rows have exact weight and overlap bounds") {
  PackingSet pk = generate_packing(PackingKind::Binary716, 16, 8, 11);
  CHECK(pk.kind == PackingKind::Binary716);
  CHECK(pk.d == 16);
  CHECK(pk.m() == 8);
  for (int r = 0; r < 8; ++r) CHECK(pk.rows[r].count() == 7);
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) CHECK(pk.pair_stat(a, b) <= 5);
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) CHECK_FALSE(pk.rows[a] == pk.rows[b]);
  for (int r = 0; r + 1 < 8; ++r) CHECK(pk.rows[r].lex_less(pk.rows[r + 1]));

  PackingReport rep = verify_packing(pk);
  CHECK(rep.ok);
  CHECK(rep.pairs_checked == 28);
  CHECK(rep.bad_rows.empty());
  CHECK(rep.violations.empty());
  CHECK(rep.pair_max <= rep.pair_bound_hi);

  PackingSet again = generate_packing(PackingKind::Binary716, 16, 8, 11);
  for (int r = 0; r < 8; ++r) CHECK(pk.rows[r] == again.rows[r]);

  // Binary coordinates read back as 0/1.
  int ones = 0;
  for (int i = 0; i < 16; ++i) {
    double c = pk.coord(0, i);
    CHECK((c == 0.0 || c == 1.0));
    if (c == 1.0) ++ones;
  }
  CHECK(ones == 7);
}

TEST_CASE("signed packing agreements stay inside the band") {
  PackingSet pk = generate_packing(PackingKind::SignedEighth, 16, 8, 12);
  CHECK(pk.kind == PackingKind::SignedEighth);
  PackingReport rep = verify_packing(pk);
  CHECK(rep.ok);
  CHECK(rep.pair_min >= rep.pair_bound_lo);
  CHECK(rep.pair_max <= rep.pair_bound_hi);
  CHECK(rep.pair_bound_lo == 7);   // 7d/16 agreements at d = 16
  CHECK(rep.pair_bound_hi == 9);   // 9d/16
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b) {
      int agree = pk.pair_stat(a, b);
      CHECK(agree >= 7);
      CHECK(agree <= 9);
    }
  for (int i = 0; i < 16; ++i)
    CHECK(std::fabs(std::fabs(pk.coord(3, i)) - 0.25) <= 1e-15);
}

TEST_CASE("packing generation rejects bad shapes and exhausted budgets") {
  CHECK_THROWS_AS(generate_packing(PackingKind::Binary716, 15, 4, 1), DimensionMismatch);
  CHECK_THROWS_AS(generate_packing(PackingKind::Binary716, 0, 4, 1), DimensionMismatch);
  CHECK_THROWS_AS(generate_packing(PackingKind::Binary716, 16, 0, 1), OutOfRange);
  CHECK_THROWS_AS(generate_packing(PackingKind::Binary716, 16, 4, 1, 0), OutOfRange);
  // 64 rows cannot fit pairwise-overlap 5 at d = 16 with one attempt per row.
  CHECK_THROWS_AS(generate_packing(PackingKind::Binary716, 16, 64, 1, 1), AttemptsExhausted);
}

TEST_CASE("packing text round-trip is exact") {
  for (PackingKind kind : {PackingKind::Binary716, PackingKind::SignedEighth}) {
    PackingSet pk = generate_packing(kind, 32, 6, 21);
    std::stringstream ss;
    save_packing(pk, ss);
    PackingSet back = load_packing(ss);
    CHECK(back.kind == pk.kind);
    CHECK(back.d == pk.d);
    CHECK(back.seed == pk.seed);
    REQUIRE(back.m() == pk.m());
    for (int r = 0; r < pk.m(); ++r) CHECK(back.rows[r] == pk.rows[r]);
  }
  std::stringstream bad("Binary716 16 2\n");  // header too short
  CHECK_THROWS_AS(load_packing(bad), IoError);
  CHECK_THROWS_AS(load_packing(std::string("/nonexistent/packing.txt")), IoError);
}

// ---------------------------------------------------------------- params

TEST_CASE("large-K derivation pins the frozen instance") {
  ConstructionParams p = derive_params(Variant::MultipassLargeK, 10, 544.0, 32, 16, 0.1, 0.5);
  CHECK(p.variant == Variant::MultipassLargeK);
  CHECK(p.n == 10);
  CHECK(p.T == 17408);
  CHECK(p.tau_epoch == 32);
  CHECK(p.d == 16);
  CHECK(p.d_prime == 16);
  CHECK(p.B == 4);
  CHECK(p.ambient_dim == 16);
  CHECK(p.t_effective() == 4096);  // min(T, d'^3)
  CHECK(p.scale() == 0.25);        // 1/sqrt(d')
  CHECK(p.shift() == 0.0);
  double alpha = std::min(1.0 / (p.eta * std::sqrt(2.0 * 4096.0)), 1.0);
  CHECK(p.alpha == doctest::Approx(alpha).epsilon(1e-15));
  CHECK(p.quantum() == p.eta * p.alpha);
  double thr = 45.0 * p.eta * p.alpha * 16.0 * 16.0 /
               (512.0 * p.B * std::sqrt(static_cast<double>(p.B)));
  CHECK(p.threshold == doctest::Approx(thr).epsilon(1e-12));

  ConstructionParams relaxed =
      derive_params(Variant::MultipassLargeK, 8, 2.0, 24, 64, 0.2, 0.5, true);
  CHECK(relaxed.T == 48);
  CHECK(relaxed.B == 64);  // degenerate single block in the relaxed regime
  CHECK(relaxed.t_effective() == 48);

  ConstructionParams preset = derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0,
                                            24, 64, 1.0 / std::sqrt(8.0), 0.5);
  CHECK(preset.T == 139264);
  CHECK(preset.B == 4);
  CHECK(preset.t_effective() == 139264);

  ConstructionParams big = derive_params(Variant::MultipassLargeK, 10, 139270.0 / 48.0,
                                         48, 2560, 1.0 / std::sqrt(10.0), 0.5);
  CHECK(big.T == 139270);
  CHECK(big.d_prime == 4096);  // next power of two above d
  CHECK(big.B == 256);
  CHECK(big.ambient_dim == 4096);
}

TEST_CASE("small-K derivation pins block width and budget") {
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true);
  CHECK(p.T == 240);
  CHECK(p.B == 2);  // 3d / tau_epoch
  CHECK(p.ambient_dim == 32);
  CHECK(p.scale() == 0.25);
  double q = p.eta * p.alpha / std::sqrt(static_cast<double>(p.B));
  CHECK(p.quantum() == doctest::Approx(q).epsilon(1e-15));
  CHECK(p.shift() == doctest::Approx(5.0 * p.eta * p.alpha /
                                     (7.0 * std::sqrt(static_cast<double>(p.B))))
                         .epsilon(1e-15));
  // threshold = 5 alpha eta d / (16 sqrt(B)) = (5d/16) quanta
  CHECK(p.threshold == doctest::Approx(5.0 * p.alpha * p.eta * 16.0 /
                                       (16.0 * std::sqrt(2.0)))
                           .epsilon(1e-12));
  CHECK(p.threshold == doctest::Approx(5.0 * p.quantum()).epsilon(1e-12));

  ConstructionParams p64 =
      derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 64, 1.0 / std::sqrt(10.0), 0.5);
  CHECK(p64.B == 8);
  CHECK(p64.T == 240);
  CHECK(p64.ambient_dim == 128);
  CHECK(p64.threshold == doctest::Approx(20.0 * p64.quantum()).epsilon(1e-12));

  ConstructionParams p3 = derive_params(Variant::MultipassSmallK, 10, 10.0, 16, 16, 0.3, 0.5, true);
  CHECK(p3.B == 3);
  CHECK(p3.T == 160);

  ConstructionParams big =
      derive_params(Variant::MultipassSmallK, 10, 10.0, 48, 2560, 1.0 / std::sqrt(10.0), 0.5);
  CHECK(big.B == 160);
  CHECK(big.T == 480);
  CHECK(big.ambient_dim == 5120);

  ConstructionParams wr = derive_params(Variant::MultipassSmallK, 10, 340.0 / 48.0, 48, 2560,
                                        1.0 / std::sqrt(10.0), 0.5);
  CHECK(wr.T == 340);
}

TEST_CASE("one-pass derivation pins the window and batch width") {
  ConstructionParams p = derive_params(Variant::OnePass, 32, 0.0, 0, 160,
                                       1.0 / std::sqrt(32.0), 0.055);
  CHECK(p.T == 32);            // one step per sample
  CHECK(p.tau_epoch == 2);     // ceil(n/16)
  CHECK(p.B == 40);            // smallest t with 2^t >= n^8
  CHECK(p.ambient_dim == 320);
  CHECK(p.scale() == 1.0);
  CHECK(p.alpha == 1.0);
  CHECK(p.quantum() == doctest::Approx(p.eta / std::sqrt(40.0)).epsilon(1e-15));

  ConstructionParams p17 = derive_params(Variant::OnePass, 17, 0.0, 0, 16, 0.2, 0.5);
  CHECK(p17.tau_epoch == 2);
  CHECK(p17.B == 33);
  CHECK(p17.T == 17);

  ConstructionParams p16 = derive_params(Variant::OnePass, 16, 0.0, 0, 16, 0.2, 0.5, true);
  CHECK(p16.tau_epoch == 1);
  CHECK(p16.B == 32);
  CHECK(p16.T == 16);
}

TEST_CASE("derivation rejects out-of-regime requests") {
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 33.0, 48, 2560, 0.1, 0.5),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 100.0, 23, 2560, 0.1, 0.5),
                  InvalidRegime);
  // relaxed, but the step budget cannot host even the smallest block size
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 8, 32.0 / 24.0, 24, 64, 0.2, 0.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassSmallK, 10, 35.0, 48, 2560, 0.1, 0.5),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassSmallK, 10, 1.5, 48, 2560, 0.1, 0.5),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassSmallK, 10, 10.0, 25, 16, 0.3, 0.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::OnePass, 16, 0.0, 0, 160, 0.2, 0.055), InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 544.0, 32, 15, 0.1, 0.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 544.0, 32, 0, 0.1, 0.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 0, 544.0, 32, 16, 0.1, 0.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 544.0, 32, 16, -1.0, 0.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 544.0, 32, 16, 0.1, 1.5, true),
                  InvalidRegime);
  CHECK_THROWS_AS(derive_params(Variant::MultipassLargeK, 10, 544.0, 0, 16, 0.1, 0.5, true),
                  InvalidRegime);
}

TEST_CASE("block schemes chunk the steered support") {
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  PackingSet sgn16 = generate_packing(PackingKind::SignedEighth, 16, 8, 12);
  ConstructionParams lk = derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0,
                                        24, 16, 0.35, 0.5, true);
  BlockScheme s = make_blocks(lk, bin16, 0);
  REQUIRE(s.blocks.size() == 2);
  CHECK(s.blocks[0].size() == 4);
  CHECK(s.blocks[1].size() == 3);
  std::set<int> seen;
  for (const auto& blk : s.blocks)
    for (int i : blk) {
      CHECK(bin16.rows[0].get(i));
      seen.insert(i);
    }
  CHECK(static_cast<int>(seen.size()) == bin16.rows[0].count());

  ConstructionParams sk = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true);
  BlockScheme s2 = make_blocks(sk, bin16, 0);
  REQUIRE(s2.blocks.size() == 4);
  CHECK(s2.blocks[0].size() == 2);
  CHECK(s2.blocks[3].size() == 1);

  ConstructionParams op = derive_params(Variant::OnePass, 32, 0.0, 0, 16, 0.17, 0.055, true);
  BlockScheme s3 = make_blocks(op, sgn16, 0);
  REQUIRE(s3.blocks.size() == 1);
  CHECK(s3.blocks[0].size() == 16);  // every coordinate is steered

  CHECK_THROWS_AS(make_blocks(lk, bin16, -1), OutOfRange);
  CHECK_THROWS_AS(make_blocks(lk, bin16, 8), OutOfRange);
}

TEST_CASE("params hexfloat round-trip is bit-exact") {
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 64,
                                       1.0 / std::sqrt(10.0), 0.5);
  std::stringstream ss;
  save_params(p, ss);
  ConstructionParams back = load_params(ss);
  CHECK(back.variant == p.variant);
  CHECK(back.n == p.n);
  CHECK(back.K == p.K);
  CHECK(back.T == p.T);
  CHECK(back.tau_epoch == p.tau_epoch);
  CHECK(back.d == p.d);
  CHECK(back.d_prime == p.d_prime);
  CHECK(back.B == p.B);
  CHECK(back.ambient_dim == p.ambient_dim);
  CHECK(back.eta == p.eta);
  CHECK(back.alpha == p.alpha);
  CHECK(back.delta == p.delta);
  CHECK(back.threshold == p.threshold);

  std::stringstream bad("variant=MultipassSmallK\nn=10\n");  // keys missing
  CHECK_THROWS_AS(load_params(bad), IoError);
  std::stringstream junk("garbage line without equals\n");
  CHECK_THROWS_AS(load_params(junk), IoError);
  CHECK_THROWS_AS(load_params(std::string("/nonexistent/params.txt")), IoError);
}

// ---------------------------------------------------------------- construction

TEST_CASE("scores and losses match plain enumeration at small dims") {
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  PackingSet sgn16 = generate_packing(PackingKind::SignedEighth, 16, 8, 12);
  ConstructionParams ps[3] = {
      derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0, 24, 16, 0.35, 0.5, true),
      derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true),
      derive_params(Variant::OnePass, 32, 0.0, 0, 16, 0.17, 0.055, true)};
  Rng rng(5150, kStreamProbes);
  for (const ConstructionParams& p : ps) {
    const PackingSet& pk = p.variant == Variant::OnePass ? sgn16 : bin16;
    BlockScheme scheme = make_blocks(p, pk, 0);
    for (int it = 0; it < 20; ++it) {
      Vec w(p.ambient_dim);
      for (int i = 0; i < p.ambient_dim; ++i) w[i] = 0.4 * rng.gaussian();
      SampleV V(pk.m());
      for (int r = 0; r < pk.m(); ++r)
        if (rng.bernoulli(0.4)) V.set(r);

      for (int r = 0; r < pk.m(); ++r)
        CHECK(std::fabs(score_of(p, w, pk, r) - ref::score(p, w, pk, r)) <= 1e-12);
      std::vector<double> all = all_scores(p, w, pk);
      REQUIRE(static_cast<int>(all.size()) == pk.m());
      for (int r = 0; r < pk.m(); ++r)
        CHECK(all[static_cast<std::size_t>(r)] == score_of(p, w, pk, r));

      double f = eval_f(p, w, V, pk);
      CHECK(std::fabs(f - ref::eval_f_enum(p, w, V, pk, nullptr)) <=
            1e-12 * std::max(1.0, std::fabs(f)));
      double fs = eval_f(p, w, V, pk, &scheme);
      CHECK(std::fabs(fs - ref::eval_f_enum(p, w, V, pk, &scheme)) <=
            1e-12 * std::max(1.0, std::fabs(fs)));
      CHECK(std::fabs(regularizer(p, w, &scheme) - ref::regularizer_enum(p, w, &scheme)) <= 1e-12);
      CHECK(std::fabs(regularizer(p, w, nullptr) - ref::regularizer_enum(p, w, nullptr)) <= 1e-12);

      SampleV empty(pk.m());
      double fe = eval_f(p, w, empty, pk);
      CHECK(std::fabs(fe - ref::eval_f_enum(p, w, empty, pk, nullptr)) <=
            1e-12 * std::max(1.0, std::fabs(fe)));
    }
    CHECK_THROWS_AS(score_of(ps[0], Vec::Zero(16), bin16, 8), OutOfRange);
  }
}

TEST_CASE("generic subgradients pass the convexity probe and corruption fails it") {
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true);
  Rng rng(606, kStreamProbes);
  for (int it = 0; it < 6; ++it) {
    Vec w(p.ambient_dim);
    for (int i = 0; i < p.ambient_dim; ++i) w[i] = 0.3 * rng.gaussian();
    SampleV V(bin16.m());
    for (int r = 0; r < bin16.m(); ++r)
      if (rng.bernoulli(0.5)) V.set(r);
    Vec g = subgradient_generic(p, w, V, bin16);
    ValidationResult ok = validate_subgradient(p, bin16, w, V, g, 50, 1e-9, rng);
    CHECK(ok.ok);
    Vec bad = g;
    bad[0] += 10.0;
    ValidationResult caught = validate_subgradient(p, bin16, w, V, bad, 50, 1e-9, rng);
    CHECK_FALSE(caught.ok);
  }
}

TEST_CASE("probed difference quotients respect the lipschitz budget") {
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  PackingSet sgn16 = generate_packing(PackingKind::SignedEighth, 16, 8, 12);
  ConstructionParams ps[3] = {
      derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0, 24, 16, 0.35, 0.5, true),
      derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true),
      derive_params(Variant::OnePass, 32, 0.0, 0, 16, 0.17, 0.055, true)};
  for (const ConstructionParams& p : ps) {
    const PackingSet& pk = p.variant == Variant::OnePass ? sgn16 : bin16;
    double slope = lipschitz_probe(p, pk, 300, 99);
    CHECK(slope <= 3.0 + 1e-9);
    CHECK(slope >= 0.0);
  }
}

// ---------------------------------------------------------------- instance

TEST_CASE("dataset sampling is deterministic with the right marginals") {
  Dataset d = sample_dataset(64, 10, 0.3, 9);
  CHECK(d.n == 10);
  CHECK(d.m == 64);
  CHECK(d.delta == 0.3);
  CHECK(d.seed == 9);
  REQUIRE(d.samples.size() == 10);
  long long total = 0;
  for (const SampleV& s : d.samples) {
    CHECK(s.n == 64);
    total += s.count();
  }
  double rate = static_cast<double>(total) / 640.0;
  CHECK(rate > 0.2);
  CHECK(rate < 0.4);

  Dataset d2 = sample_dataset(64, 10, 0.3, 9);
  for (int i = 0; i < 10; ++i) CHECK(d.samples[static_cast<std::size_t>(i)] ==
                                     d2.samples[static_cast<std::size_t>(i)]);

  std::stringstream ss;
  save_dataset(d, ss);
  Dataset back = load_dataset(ss);
  CHECK(back.n == d.n);
  CHECK(back.m == d.m);
  CHECK(back.delta == d.delta);
  CHECK(back.seed == d.seed);
  for (int i = 0; i < 10; ++i) CHECK(back.samples[static_cast<std::size_t>(i)] ==
                                     d.samples[static_cast<std::size_t>(i)]);
  std::stringstream bad("10 64\n");
  CHECK_THROWS_AS(load_dataset(bad), IoError);
  CHECK_THROWS_AS(load_dataset(std::string("/nonexistent/data.txt")), IoError);
}

TEST_CASE("uncovered and common row lookups") {
  auto ptrs = [](const std::vector<SampleV>& v) {
    std::vector<const SampleV*> out;
    for (const SampleV& s : v) out.push_back(&s);
    return out;
  };
  std::vector<SampleV> sets = {bits(6, {0, 1}), bits(6, {1, 2}), bits(6, {0, 2})};
  CHECK(find_uncovered(ptrs(sets), 6) == 3);
  std::vector<SampleV> cover = {bits(4, {0, 1}), bits(4, {2, 3})};
  CHECK(find_uncovered(ptrs(cover), 4) == -1);
  CHECK(find_uncovered({}, 5) == 0);

  std::vector<SampleV> com = {bits(6, {1, 3, 4}), bits(6, {3, 4}), bits(6, {0, 3, 4, 5})};
  CHECK(find_common(ptrs(com), 6) == 3);  // earliest shared row
  std::vector<SampleV> disjoint = {bits(6, {1}), bits(6, {2})};
  CHECK(find_common(ptrs(disjoint), 6) == -1);
  CHECK_THROWS_AS(find_common({}, 6), OutOfRange);
}

TEST_CASE("multipass good event demands coverage and an unseen row") {
  Dataset data;
  data.n = 3;
  data.m = 4;
  data.delta = 0.5;
  data.samples = {bits(4, {0}), bits(4, {1}), bits(4, {0, 1})};

  EventInfo held = good_event_multipass(data, {0, 1, 2, 0}, 4);
  CHECK(held.held);
  CHECK(held.coverage);
  CHECK(held.u0 == 2);  // first row no sample touches

  EventInfo uncovered = good_event_multipass(data, {0, 1, 0, 1}, 4);
  CHECK_FALSE(uncovered.held);
  CHECK_FALSE(uncovered.coverage);

  Dataset full = data;
  full.samples = {bits(4, {0, 1}), bits(4, {2, 3}), bits(4, {1, 2})};
  EventInfo saturated = good_event_multipass(full, {0, 1, 2}, 3);
  CHECK(saturated.coverage);
  CHECK_FALSE(saturated.held);
  CHECK(saturated.u0 == -1);

  CHECK_THROWS_AS(good_event_multipass(data, {0, 1}, 4), OutOfRange);
  CHECK_THROWS_AS(good_event_multipass(data, {0, 1, 7, 0}, 4), OutOfRange);
}

TEST_CASE("one-pass good event wants an early common row that never returns") {
  Dataset data;
  data.n = 17;  // window is ceil(17/16) = 2 samples
  data.m = 8;
  data.delta = 0.5;
  data.samples.assign(17, BitVec(8));
  data.samples[0] = bits(8, {3, 5});
  data.samples[1] = bits(8, {3, 6});
  EventInfo ok = good_event_onepass(data);
  CHECK(ok.held);
  CHECK(ok.u0 == 3);

  Dataset stale = data;
  stale.samples[5] = bits(8, {3});
  EventInfo bad = good_event_onepass(stale);
  CHECK_FALSE(bad.held);
  CHECK(bad.u0 == 3);

  Dataset none = data;
  none.samples[1] = bits(8, {6});
  EventInfo missing = good_event_onepass(none);
  CHECK_FALSE(missing.held);
  CHECK(missing.u0 == -1);
}

TEST_CASE("population loss matches monte carlo and the origin closed form") {
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  PackingSet sgn16 = generate_packing(PackingKind::SignedEighth, 16, 8, 12);
  ConstructionParams ps[3] = {
      derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0, 24, 16, 0.35, 0.5, true),
      derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true),
      derive_params(Variant::OnePass, 32, 0.0, 0, 16, 0.17, 0.055, true)};
  Rng rng(99, kStreamProbes);
  for (const ConstructionParams& p : ps) {
    const PackingSet& pk = p.variant == Variant::OnePass ? sgn16 : bin16;
    double f0 = population_loss(p, Vec::Zero(p.ambient_dim), pk);
    CHECK(std::fabs(f0 - p.scale() * p.threshold) <=
          1e-12 * std::max(1.0, std::fabs(f0)));
    for (int it = 0; it < 3; ++it) {
      Vec w(p.ambient_dim);
      for (int i = 0; i < p.ambient_dim; ++i) w[i] = 0.3 * rng.gaussian();
      std::vector<double> sc = ref::scores(p, w, pk);
      ref::McStat mc = ref::max_term_mc(sc, p.threshold, p.delta, 200000, 1234 + it);
      double lib = population_loss(p, w, pk);
      double want = p.scale() * mc.mean + regularizer(p, w, nullptr);
      CHECK(std::fabs(lib - want) <= 4.0 * p.scale() * mc.se + 1e-9);
    }
  }
  CHECK_THROWS_AS(population_loss(ps[0], Vec::Zero(4), bin16), DimensionMismatch);
}

TEST_CASE("empirical loss averages the per-sample losses") {
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true);
  Dataset data = sample_dataset(8, 10, 0.4, 77);
  Rng rng(7, kStreamProbes);
  Vec w(p.ambient_dim);
  for (int i = 0; i < p.ambient_dim; ++i) w[i] = 0.2 * rng.gaussian();
  double mean = 0.0;
  for (const SampleV& s : data.samples) mean += eval_f(p, w, s, bin16);
  mean /= static_cast<double>(data.n);
  CHECK(empirical_loss(p, w, bin16, data) == doctest::Approx(mean).epsilon(1e-13));
}

// ---------------------------------------------------------------- oracle

TEST_CASE("oracle construction rejects mismatched pieces") {
  ConstructionParams lk = derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0,
                                        24, 64, 1.0 / std::sqrt(8.0), 0.5);
  PackingSet bin16 = generate_packing(PackingKind::Binary716, 16, 8, 11);
  PackingSet sgn16 = generate_packing(PackingKind::SignedEighth, 16, 8, 12);
  Dataset data = sample_dataset(8, 8, 0.5, 3);
  CHECK_THROWS_AS(make_oracle(lk, bin16, data), DimensionMismatch);  // d' = 64 vs packing d = 16

  ConstructionParams sk = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true);
  CHECK_THROWS_AS(make_oracle(sk, sgn16, data), DimensionMismatch);  // wrong packing family

  Dataset wrong_m = sample_dataset(16, 10, 0.5, 3);
  CHECK_THROWS_AS(make_oracle(sk, bin16, wrong_m), DimensionMismatch);
}

TEST_CASE("staircase reaches the strictly decreasing profile on equal blocks") {
  // d' = 64 gives seven equal blocks of four; the frozen dataset seed holds
  // the good event on the cyclic prefix.
  ConstructionParams p = derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0,
                                       24, 64, 1.0 / std::sqrt(8.0), 0.5);
  PackingSet pk = generate_packing(PackingKind::Binary716, p.d_prime, 64, 778);
  FoundEvent fe = find_multipass_event(p, pk.m(), p.delta, 9600, 200);
  CHECK(fe.seed == 9624);
  CHECK(fe.ev.u0 == 27);

  OracleState st = make_oracle(p, pk, fe.data);
  Vec w = Vec::Zero(p.ambient_dim);
  std::map<StepBranch, int> counts;
  long long t = 0;
  double worst_ratio = 0.0;
  while (st.phase != Phase::Idle && t < 200) {
    ++t;
    SparseGrad g = oracle_step(st, w, {static_cast<int>((t - 1) % p.n)});
    if (t <= p.tau_epoch) {
      CHECK(st.last_branch == StepBranch::Observe);
      CHECK(g.entries.empty());
    }
    apply_sparse(w, g, p.eta);
    counts[st.last_branch]++;
    worst_ratio = std::max(worst_ratio, w.squaredNorm() /
                                            (2.0 * p.eta * p.eta * p.alpha * p.alpha *
                                             static_cast<double>(t + 1)));
  }
  REQUIRE(st.phase == Phase::Idle);
  CHECK(st.u0 == fe.ev.u0);

  ref::Staircase rs = ref::staircase(7);
  CHECK(rs.raises == 28);
  CHECK(rs.shifts == 56);
  CHECK(st.steps_to_idle == p.tau_epoch + rs.transitions + 1);
  CHECK(st.steps_to_idle == 109);
  CHECK(counts[StepBranch::RaiseBlock] == rs.raises);
  CHECK(counts[StepBranch::ShiftPair] == rs.shifts);
  CHECK(st.guard_events <= 10);  // benign ulp-level ties
  CHECK(worst_ratio <= 1.0 + 1e-12);  // norm recursion holds pointwise

  // Terminal block sums are lvl * sqrt(|blk|) * eta * alpha with lvl = M..1.
  BlockScheme scheme = make_blocks(p, pk, st.u0);
  REQUIRE(scheme.blocks.size() == 7);
  double dot = 0.0;
  for (std::size_t j = 0; j < scheme.blocks.size(); ++j) {
    double sum = 0.0;
    for (int i : scheme.blocks[j]) sum += w[i];
    double lvl = static_cast<double>(7 - j);
    CHECK(std::fabs(sum - lvl * 2.0 * p.eta * p.alpha) <= 1e-9);
    dot += sum;
  }
  double target = std::sqrt(static_cast<double>(p.B)) * p.eta * p.alpha * 49.0 *
                  static_cast<double>(p.d_prime) * static_cast<double>(p.d_prime) /
                  (2.0 * 256.0 * 256.0 * static_cast<double>(p.B) * static_cast<double>(p.B));
  CHECK(dot >= target);

  for (int extra = 0; extra < 20; ++extra) {
    SparseGrad g = oracle_step(st, w, {extra % p.n});
    CHECK(g.entries.empty());
    CHECK(st.last_branch == StepBranch::IdleZero);
    CHECK(st.phase == Phase::Idle);
  }
  CHECK(st.steps_to_idle == 109);
}

TEST_CASE("staircase handles a short trailing block") {
  ConstructionParams p = derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0,
                                       24, 16, 0.35, 0.5, true);
  PackingSet pk = generate_packing(PackingKind::Binary716, 16, 16, 11);
  FoundEvent fe = find_multipass_event(p, pk.m(), 0.3, 4000, 500);
  CHECK(fe.seed == 4000);
  CHECK(fe.ev.u0 == 4);

  OracleState st = make_oracle(p, pk, fe.data);
  Vec w = Vec::Zero(p.ambient_dim);
  std::map<StepBranch, int> counts;
  long long t = 0;
  while (st.phase != Phase::Idle && t < 200) {
    ++t;
    SparseGrad g = oracle_step(st, w, {static_cast<int>((t - 1) % p.n)});
    apply_sparse(w, g, p.eta);
    counts[st.last_branch]++;
  }
  REQUIRE(st.phase == Phase::Idle);
  ref::Staircase rs = ref::staircase(2);  // blocks of 4 and 3
  CHECK(rs.transitions == 4);
  CHECK(st.steps_to_idle == 29);
  CHECK(counts[StepBranch::RaiseBlock] == rs.raises);
  CHECK(counts[StepBranch::ShiftPair] == rs.shifts);

  BlockScheme scheme = make_blocks(p, pk, st.u0);
  REQUIRE(scheme.blocks.size() == 2);
  double s0 = 0.0, s1 = 0.0;
  for (int i : scheme.blocks[0]) s0 += w[i];
  for (int i : scheme.blocks[1]) s1 += w[i];
  CHECK(std::fabs(s0 - 2.0 * std::sqrt(4.0) * p.eta * p.alpha) <= 1e-9);
  CHECK(std::fabs(s1 - 1.0 * std::sqrt(3.0) * p.eta * p.alpha) <= 1e-9);
}

TEST_CASE("batched steering lands every small-K coordinate on its target") {
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 64,
                                       1.0 / std::sqrt(10.0), 0.5);
  PackingSet pk = generate_packing(PackingKind::Binary716, p.d, 64, 779);
  FoundEvent fe = find_multipass_event(p, pk.m(), p.delta, 9900, 500);
  CHECK(fe.seed == 9908);
  CHECK(fe.ev.u0 == 43);

  OracleState st = make_oracle(p, pk, fe.data);
  Vec w = Vec::Zero(p.ambient_dim);
  Rng prng(123, kStreamProbes);
  long long t = 0;
  int emissions = 0, validated = 0;
  while (st.phase != Phase::Idle && t < 200) {
    ++t;
    int id = static_cast<int>((t - 1) % p.n);
    SparseGrad g = oracle_step(st, w, {id});
    if (st.phase == Phase::Steering && !g.entries.empty()) {
      ++emissions;
      if (validated < 3) {
        Vec gd = to_dense(g, p.ambient_dim);
        ValidationResult vr = validate_subgradient(p, pk, w, fe.data.samples[id], gd,
                                                   40, 1e-9, prng, &st.blocks);
        CHECK(vr.ok);
        ++validated;
      }
    }
    apply_sparse(w, g, p.eta);
  }
  REQUIRE(st.phase == Phase::Idle);
  CHECK(st.steps_to_idle == 33);
  int zeros = p.d - pk.rows[st.u0].count();
  int ones = pk.rows[st.u0].count();
  CHECK(emissions == (zeros + p.B - 1) / p.B + (ones + p.B - 1) / p.B - 1);
  CHECK(st.guard_events == 0);

  // Shifted sums: quantum on the support, zero off it.
  for (int i = 0; i < p.d; ++i) {
    double sig = w[i] + w[p.d + i] + p.shift();
    if (pk.rows[st.u0].get(i)) CHECK(std::fabs(sig - p.quantum()) <= 1e-12);
    else CHECK(std::fabs(sig) <= 1e-12);
  }
  SparseGrad g = oracle_step(st, w, {0});
  CHECK(g.entries.empty());
  CHECK(st.phase == Phase::Idle);
}

TEST_CASE("one-pass steering signs the target row with concurrent batches") {
  ConstructionParams p = derive_params(Variant::OnePass, 32, 0.0, 0, 160,
                                       1.0 / std::sqrt(32.0), 0.055);
  PackingSet pk = generate_packing(PackingKind::SignedEighth, p.d, 64, 780);
  FoundEvent fe = find_onepass_event(p, pk.m(), 17000, 4000);
  CHECK(fe.seed == 17072);
  CHECK(fe.ev.u0 == 48);

  OracleState st = make_oracle(p, pk, fe.data);
  Vec w = Vec::Zero(p.ambient_dim);
  Rng prng(321, kStreamProbes);
  int validated = 0;
  for (long long t = 1; t <= p.T; ++t) {
    int id = static_cast<int>(t - 1);
    SparseGrad g = oracle_step(st, w, {id});
    if (st.phase == Phase::Steering && !g.entries.empty() && validated < 2) {
      Vec gd = to_dense(g, p.ambient_dim);
      ValidationResult vr = validate_subgradient(p, pk, w, fe.data.samples[id], gd,
                                                 40, 1e-9, prng, &st.blocks);
      CHECK(vr.ok);
      ++validated;
    }
    apply_sparse(w, g, p.eta);
    if (t > st.steps_to_idle && st.steps_to_idle > 0) {
      CHECK(g.entries.empty());
      CHECK(st.phase == Phase::Idle);
    }
  }
  REQUIRE(st.phase == Phase::Idle);
  int plus = pk.rows[st.u0].count();
  int minus = p.d - plus;
  long long batch_steps = std::max((plus + p.B - 1) / p.B, (minus + p.B - 1) / p.B);
  CHECK(st.steps_to_idle == p.tau_epoch + batch_steps + 1);
  CHECK(st.steps_to_idle == 6);
  CHECK(st.guard_events == 0);
  for (int i = 0; i < p.d; ++i) {
    double sig = w[i] + w[p.d + i];
    double want = pk.rows[st.u0].get(i) ? p.quantum() : -p.quantum();
    CHECK(std::fabs(sig - want) <= 1e-12);
  }
}

TEST_CASE("oracle falls back to generic subgradients when no row is unseen") {
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16,
                                       0.3, 0.95, true);
  PackingSet pk = generate_packing(PackingKind::Binary716, 16, 16, 781);
  Dataset data = sample_dataset(pk.m(), p.n, p.delta, 55);
  BitVec uni(pk.m());
  for (const SampleV& s : data.samples) uni.or_with(s);
  REQUIRE(uni.first_clear() == -1);  // the window has nothing to aim at

  OracleState st = make_oracle(p, pk, data);
  Vec w = Vec::Zero(p.ambient_dim);
  for (long long t = 1; t <= p.tau_epoch; ++t)
    oracle_step(st, w, {static_cast<int>((t - 1) % p.n)});
  Rng noise(91, 7);
  for (int i = 0; i < p.ambient_dim; ++i) w[i] = 0.01 * noise.gaussian();

  SparseGrad g = oracle_step(st, w, {3});
  CHECK(st.phase == Phase::Fallback);
  CHECK(st.last_branch == StepBranch::Fallback);
  CHECK(st.u0 == -1);
  CHECK(st.steps_to_idle == -1);
  Vec got = to_dense(g, p.ambient_dim);
  Vec want = subgradient_generic(p, w, data.samples[3], pk);
  CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);

  // Several ids average their generic subgradients.
  SparseGrad g2 = oracle_step(st, w, {0, 1});
  Vec got2 = to_dense(g2, p.ambient_dim);
  Vec want2 = 0.5 * (subgradient_generic(p, w, data.samples[0], pk) +
                     subgradient_generic(p, w, data.samples[1], pk));
  CHECK((got2 - want2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.phase == Phase::Fallback);
}

TEST_CASE("a stale target flips the oracle to fallback with the block scheme kept") {
  ConstructionParams p = derive_params(Variant::MultipassLargeK, 4, 30.0, 2, 16, 0.2, 0.5, true);
  PackingSet pk = generate_packing(PackingKind::Binary716, p.d_prime, 8, 782);
  Dataset data;
  data.n = 4;
  data.m = 8;
  data.delta = 0.5;
  data.samples = {bits(8, {0}), bits(8, {1}), bits(8, {2}), BitVec(8)};

  OracleState st = make_oracle(p, pk, data);
  Vec w = Vec::Zero(p.ambient_dim);
  oracle_step(st, w, {0});
  oracle_step(st, w, {1});
  CHECK(st.phase == Phase::Observing);

  // Step 3 resolves u0 = 2, then sees row 2 inside its own sample and flips.
  SparseGrad g = oracle_step(st, w, {2});
  CHECK(st.phase == Phase::Fallback);
  CHECK(st.last_branch == StepBranch::Fallback);
  CHECK(st.u0 == 2);
  BlockScheme scheme = make_blocks(p, pk, 2);
  Vec got = to_dense(g, p.ambient_dim);
  Vec want = subgradient_generic(p, w, data.samples[2], pk, &scheme);
  CHECK((got - want).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("an idle one-pass oracle still flips when the target reappears") {
  ConstructionParams p = derive_params(Variant::OnePass, 17, 0.0, 0, 16, 0.2, 0.5);
  PackingSet pk = generate_packing(PackingKind::SignedEighth, 16, 8, 783);
  Dataset data;
  data.n = 17;
  data.m = 8;
  data.delta = 0.5;
  data.samples.assign(17, BitVec(8));
  data.samples[0] = bits(8, {3, 5});
  data.samples[1] = bits(8, {3, 6});
  data.samples[5] = bits(8, {3});

  OracleState st = make_oracle(p, pk, data);
  Vec w = Vec::Zero(p.ambient_dim);
  std::vector<Phase> phases;
  for (long long t = 1; t <= 6; ++t) {
    SparseGrad g = oracle_step(st, w, {static_cast<int>(t - 1)});
    phases.push_back(st.phase);
    if (t == 3) CHECK(g.entries.size() == 16);  // both signed batches in one step
    apply_sparse(w, g, p.eta);
  }
  CHECK(phases[0] == Phase::Observing);
  CHECK(phases[1] == Phase::Observing);
  CHECK(phases[2] == Phase::Steering);
  CHECK(phases[3] == Phase::Idle);
  CHECK(phases[4] == Phase::Idle);
  CHECK(phases[5] == Phase::Fallback);  // sample 5 re-serves row 3
  CHECK(st.steps_to_idle == 4);         // the idle step count survives the flip
  CHECK(st.u0 == 3);
}

TEST_CASE("oracle steps reject malformed input and corrupted state") {
  ConstructionParams p = derive_params(Variant::MultipassSmallK, 10, 10.0, 24, 16, 0.3, 0.5, true);
  PackingSet pk = generate_packing(PackingKind::Binary716, 16, 16, 781);
  Dataset data = sample_dataset(pk.m(), p.n, 0.5, 5);
  OracleState st = make_oracle(p, pk, data);
  Vec w = Vec::Zero(p.ambient_dim);
  CHECK_THROWS_AS(oracle_step(st, w, {}), OutOfRange);
  CHECK_THROWS_AS(oracle_step(st, w, {10}), OutOfRange);
  CHECK_THROWS_AS(oracle_step(st, Vec::Zero(5), {0}), DimensionMismatch);

  OracleState blank;
  CHECK_THROWS_AS(oracle_step(blank, w, {0}), StateCorruption);

  OracleState poked = make_oracle(p, pk, data);
  poked.phase = Phase::Steering;  // cannot steer inside the window
  CHECK_THROWS_AS(oracle_step(poked, w, {0}), StateCorruption);

  // Drive a healthy oracle into steering, then erase its target.
  ConstructionParams lk = derive_params(Variant::MultipassLargeK, 8, 139264.0 / 24.0,
                                        24, 16, 0.35, 0.5, true);
  PackingSet pk16 = generate_packing(PackingKind::Binary716, 16, 16, 11);
  FoundEvent fe = find_multipass_event(lk, pk16.m(), 0.3, 4000, 500);
  OracleState run = make_oracle(lk, pk16, fe.data);
  Vec w2 = Vec::Zero(lk.ambient_dim);
  for (long long t = 1; t <= lk.tau_epoch + 1; ++t) {
    SparseGrad g = oracle_step(run, w2, {static_cast<int>((t - 1) % lk.n)});
    apply_sparse(w2, g, lk.eta);
  }
  REQUIRE(run.phase == Phase::Steering);
  run.u0 = -1;
  CHECK_THROWS_AS(oracle_step(run, w2, {0}), StateCorruption);
}

TEST_CASE("sparse gradients densify with duplicate accumulation") {
  SparseGrad g;
  g.entries = {{0, 1.5}, {2, -2.0}, {0, 0.25}};
  Vec v = to_dense(g, 4);
  CHECK(v[0] == 1.75);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == -2.0);
  CHECK(v[3] == 0.0);
  SparseGrad z;
  CHECK(z.zero());
  CHECK_FALSE(g.zero());
}

// ---------------------------------------------------------------- optimizer

TEST_CASE("schedule factories produce the advertised index streams") {
  Schedule one = make_schedule_onepass(4);
  CHECK(one.kind == ScheduleKind::OnePass);
  CHECK(one.T == 4);
  CHECK(one.idx == std::vector<int>{0, 1, 2, 3});

  Schedule ss = make_schedule_single_shuffle(5, 3, 9);
  CHECK(ss.T == 15);
  std::vector<int> first(ss.idx.begin(), ss.idx.begin() + 5);
  std::vector<int> sorted = first;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4});
  for (int e = 1; e < 3; ++e)
    for (int i = 0; i < 5; ++i)
      CHECK(ss.idx[static_cast<std::size_t>(e * 5 + i)] == first[static_cast<std::size_t>(i)]);

  Schedule ms = make_schedule_multi_shuffle(5, 4, 9);
  CHECK(ms.T == 20);
  bool some_epoch_differs = false;
  for (int e = 0; e < 4; ++e) {
    std::vector<int> ep(ms.idx.begin() + e * 5, ms.idx.begin() + (e + 1) * 5);
    std::vector<int> s2 = ep;
    std::sort(s2.begin(), s2.end());
    CHECK(s2 == std::vector<int>{0, 1, 2, 3, 4});
    if (e > 0 && ep != std::vector<int>(ms.idx.begin(), ms.idx.begin() + 5))
      some_epoch_differs = true;
  }
  CHECK(some_epoch_differs);

  Schedule wr = make_schedule_with_replacement(6, 50, 13);
  CHECK(wr.T == 50);
  for (int i : wr.idx) {
    CHECK(i >= 0);
    CHECK(i < 6);
  }
  Schedule wr2 = make_schedule_with_replacement(6, 50, 13);
  CHECK(wr.idx == wr2.idx);

  Schedule ex = make_schedule_explicit(2, {{1, 0}, {0, 1}});
  CHECK(ex.T == 4);
  CHECK(ex.idx == std::vector<int>{1, 0, 0, 1});

  CHECK_THROWS_AS(make_schedule_explicit(2, {{0, 1, 1}}), ConfigError);
  CHECK_THROWS_AS(make_schedule_explicit(2, {{0, 0}}), ConfigError);
  CHECK_THROWS_AS(make_schedule_explicit(2, {}), ConfigError);
  CHECK_THROWS_AS(make_schedule_onepass(0), OutOfRange);
  CHECK_THROWS_AS(make_schedule_single_shuffle(0, 2, 1), OutOfRange);
  CHECK_THROWS_AS(make_schedule_single_shuffle(3, 0, 1), OutOfRange);
  CHECK_THROWS_AS(make_schedule_with_replacement(3, 0, 1), OutOfRange);
}

TEST_CASE("engine matches the dense reference bit for bit") {
  for (bool dense : {true, false}) {
    DetSource src(dense);
    Schedule sch = make_schedule_single_shuffle(3, 20, 42);
    RunConfig rc;
    rc.eta = 0.35;
    rc.T = 60;
    rc.radius = 0.8;
    rc.tau_list = {1, 9, 60};
    rc.record_trace = true;
    RunResult rr = run_sgd(src, sch, rc);

    auto grad = [&](const Vec&, long long t) {
      Vec g = Vec::Zero(3);
      if (dense)
        for (int c = 0; c < 3; ++c) g[c] = DetSource::val(t, c);
      else g[t % 3] = DetSource::val(t, static_cast<int>(t % 3));
      return g;
    };
    std::vector<Vec> traj = ref::sgd_dense(grad, 3, rc.T, rc.eta, rc.radius);

    for (int c = 0; c < 3; ++c) CHECK(rr.w_final[c] == traj.back()[c]);
    CHECK(rr.projection_count > 0);

    // Suffix references mirror the engine's prefix-difference arithmetic.
    auto suffix_ref = [&](long long tau) {
      Vec acc = Vec::Zero(3), snap = Vec::Zero(3);
      for (long long t = 1; t <= rc.T; ++t) {
        acc += traj[static_cast<std::size_t>(t - 1)];
        if (t == rc.T - tau) snap = acc;
      }
      return Vec(((acc - snap) / static_cast<double>(tau)).eval());
    };
    CHECK((rr.suffix(1) - suffix_ref(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((rr.suffix(9) - suffix_ref(9)).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((rr.suffix(60) - suffix_ref(60)).cwiseAbs().maxCoeff() <= 1e-13);
    if (dense) CHECK((rr.suffix(60) - suffix_ref(60)).cwiseAbs().maxCoeff() == 0.0);

    double ref_max = 0.0;
    for (const Vec& v : traj) ref_max = std::max(ref_max, v.norm());
    CHECK(std::fabs(rr.max_norm - ref_max) <= 1e-12);

    REQUIRE(rr.trace.size() == 60);
    for (std::size_t i = 0; i < rr.trace.size(); ++i) {
      CHECK(rr.trace[i].t == static_cast<long long>(i) + 1);
      CHECK(std::fabs(rr.trace[i].norm_w - traj[i].norm()) <= 1e-12);
    }

    RunConfig rc2 = rc;
    rc2.record_trace = false;
    rc2.norm_recursion_coeff = 1e-12;
    CHECK(run_sgd(src, sch, rc2).norm_recursion_violations == 60);
    rc2.norm_recursion_coeff = 1e9;
    CHECK(run_sgd(src, sch, rc2).norm_recursion_violations == 0);
  }
}

TEST_CASE("run guards and helpers") {
  DetSource src(true);
  Schedule sch = make_schedule_single_shuffle(3, 20, 42);
  RunConfig rc;
  rc.eta = 0.1;
  rc.T = 60;
  rc.tau_list = {1, 5};

  RunConfig bad = rc;
  bad.T = 61;
  CHECK_THROWS_AS(run_sgd(src, sch, bad), ScheduleExhausted);
  bad = rc;
  bad.T = 0;
  CHECK_THROWS_AS(run_sgd(src, sch, bad), OutOfRange);
  bad = rc;
  bad.radius = -1.0;
  CHECK_THROWS_AS(run_sgd(src, sch, bad), OutOfRange);
  bad = rc;
  bad.tau_list = {0};
  CHECK_THROWS_AS(run_sgd(src, sch, bad), OutOfRange);
  bad = rc;
  bad.tau_list = {61};
  CHECK_THROWS_AS(run_sgd(src, sch, bad), OutOfRange);

  RunResult rr = run_sgd(src, sch, rc);
  CHECK_THROWS_AS(rr.suffix(3), OutOfRange);

  struct ZeroDim : GradientSource {
    int dim() const override { return 0; }
    SparseGrad next(const Vec&, const std::vector<int>&, long long) override { return {}; }
  } zd;
  CHECK_THROWS_AS(run_sgd(zd, sch, rc), DimensionMismatch);

  struct WildEntry : GradientSource {
    int dim() const override { return 3; }
    SparseGrad next(const Vec&, const std::vector<int>&, long long) override {
      SparseGrad g;
      g.entries.push_back({7, 1.0});
      return g;
    }
  } wild;
  CHECK_THROWS_AS(run_sgd(wild, sch, rc), DimensionMismatch);

  Vec v(1);
  v[0] = 0.3;
  CHECK(project_ball(v, 1.0)[0] == 0.3);
  Vec u(2);
  u[0] = 2.0;
  u[1] = 0.0;
  Vec pu = project_ball(u, 1.0);
  CHECK(pu[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pu[1] == 0.0);
  CHECK_THROWS_AS(project_ball(u, 0.0), OutOfRange);

  std::vector<Vec> w_list;
  for (double x : {1.0, 2.0, 3.0}) {
    Vec wv(1);
    wv[0] = x;
    w_list.push_back(wv);
  }
  CHECK(suffix_average(w_list, 2)[0] == 2.5);
  CHECK_THROWS_AS(suffix_average(w_list, 0), OutOfRange);
  CHECK_THROWS_AS(suffix_average(w_list, 4), OutOfRange);
}

// ---------------------------------------------------------------- harness

TEST_CASE("wilson interval closed form") {
  double lo = -1.0, hi = -1.0;
  wilson_interval(50, 100, 1.96, &lo, &hi);
  CHECK(std::fabs(lo - 0.40382982859014716) <= 1e-9);
  CHECK(std::fabs(hi - 0.59617017140985284) <= 1e-9);
  wilson_interval(0, 0, 1.96, &lo, &hi);
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
  wilson_interval(0, 10, 1.96, &lo, &hi);
  CHECK(lo == 0.0);
  CHECK(hi < 0.35);
  wilson_interval(10, 10, 1.96, &lo, &hi);
  CHECK(hi == 1.0);
  CHECK(lo > 0.65);
}

TEST_CASE("shortest round-trip double formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.0) == "0");
  for (double x : {1.0 / 3.0, 0.40382982859014716, 1e-300, -2.5e7,
                   0.057054433073454799}) {
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
}

TEST_CASE("config lines parse every key and reject the rest") {
  ExperimentConfig cfg;
  apply_config_line(cfg, "experiment", "lower-bound-smallk");
  CHECK(cfg.experiment == Experiment::LowerBoundSmallK);
  apply_config_line(cfg, "n", "12");
  CHECK(cfg.n == 12);
  apply_config_line(cfg, "k", "7.5");
  CHECK(cfg.k == 7.5);
  apply_config_line(cfg, "eta", "0.1,0.25");
  REQUIRE(cfg.eta_grid.size() == 2);
  CHECK(cfg.eta_grid[0] == 0.1);
  CHECK(cfg.eta_grid[1] == 0.25);
  apply_config_line(cfg, "trials", "33");
  CHECK(cfg.trials == 33);
  apply_config_line(cfg, "seed", "99");
  CHECK(cfg.seed == 99);
  apply_config_line(cfg, "mode", "strict");
  CHECK(cfg.mode == Mode::Strict);
  apply_config_line(cfg, "tau", "1,8");
  REQUIRE(cfg.tau_list.size() == 2);
  CHECK(cfg.tau_list[0] == 1);
  CHECK(cfg.tau_list[1] == 8);
  apply_config_line(cfg, "out", "/tmp/x.csv");
  CHECK(cfg.out == "/tmp/x.csv");
  apply_config_line(cfg, "threads", "4");
  CHECK(cfg.threads == 4);

  CHECK_THROWS_AS(apply_config_line(cfg, "bogus", "1"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(cfg, "n", "not-a-number"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(cfg, "experiment", "unknown-exp"), ConfigError);
  CHECK_THROWS_AS(apply_config_line(cfg, "mode", "fuzzy"), ConfigError);

  const char* names[] = {"lower-bound-multipass", "lower-bound-smallk",
                         "lower-bound-onepass",   "lower-bound-with-replacement",
                         "coupon",                "coverage",
                         "sweep",                 "baseline",
                         "verify"};
  for (const char* name : names) CHECK(to_string(experiment_from(name)) == name);
  CHECK(to_string(mode_from("strict")) == std::string("strict"));
  CHECK(to_string(mode_from("scaled")) == std::string("scaled"));

  std::string path = "/tmp/sgdsim_unit_cfg.txt";
  {
    std::ofstream f(path);
    f << "# comment line\n\nexperiment = coupon\ntrials=5\n";
  }
  ExperimentConfig fromfile = parse_config_file(path);
  CHECK(fromfile.experiment == Experiment::CouponCheck);
  CHECK(fromfile.trials == 5);
  {
    std::ofstream f(path);
    f << "trials 5\n";  // missing equals sign
  }
  CHECK_THROWS_AS(parse_config_file(path), ConfigError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(parse_config_file("/nonexistent/cfg.txt"), IoError);
}

TEST_CASE("parallel_for is deterministic and transports exceptions") {
  std::vector<long long> a(100, 0), b(100, 0);
  parallel_for(100, 1, [&](long long i) { a[static_cast<std::size_t>(i)] = i * i; });
  parallel_for(100, 4, [&](long long i) { b[static_cast<std::size_t>(i)] = i * i; });
  CHECK(a == b);
  parallel_for(0, 4, [&](long long) { CHECK(false); });
  CHECK_THROWS_AS(parallel_for(8, 3,
                               [](long long i) {
                                 if (i == 5) throw OutOfRange("boom");
                               }),
                  Error);
}

TEST_CASE("exact coupon absorption matches inclusion-exclusion") {
  CHECK(std::fabs(coupon_cover_exact(8, 24) -
                  ref::coupon_cover_inclusion_exclusion(8, 24)) <= 1e-12);
  CHECK(std::fabs(coupon_cover_exact(16, 64) -
                  ref::coupon_cover_inclusion_exclusion(16, 64)) <= 1e-12);
  CHECK(std::fabs(coupon_cover_exact(64, 384) -
                  ref::coupon_cover_inclusion_exclusion(64, 384)) <= 1e-12);
  CHECK(coupon_cover_exact(8, 7) == 0.0);
  CHECK(coupon_cover_exact(1, 1) == 1.0);
}

TEST_CASE("lower-bound setups pin the frozen instances") {
  ExperimentConfig c;
  c.mode = Mode::Scaled;
  c.seed = 1;

  c.experiment = Experiment::LowerBoundMultipass;
  LowerBoundSetup mp = make_lower_bound_setup(c);
  CHECK(mp.params.variant == Variant::MultipassLargeK);
  CHECK(mp.schedule_kind == ScheduleKind::MultiPassSingleShuffle);
  CHECK(mp.params.n == 8);
  CHECK(mp.params.d == 64);
  CHECK(mp.params.d_prime == 64);
  CHECK(mp.packing.m() == 256);
  CHECK(mp.packing.kind == PackingKind::Binary716);
  CHECK(mp.params.tau_epoch == 24);
  CHECK(mp.params.T == 139264);
  CHECK(mp.trials == 50);
  CHECK(mp.eta == 1.0 / std::sqrt(8.0));
  CHECK(mp.tau_list == std::vector<long long>{1, 17408, 69632, 139264});

  c.experiment = Experiment::LowerBoundSmallK;
  LowerBoundSetup sk = make_lower_bound_setup(c);
  CHECK(sk.params.variant == Variant::MultipassSmallK);
  CHECK(sk.params.n == 10);
  CHECK(sk.params.d == 512);
  CHECK(sk.packing.m() == 256);
  CHECK(sk.params.T == 240);
  CHECK(sk.trials == 50);
  CHECK(sk.tau_list == std::vector<long long>{1, 30, 120, 240});
  double rhs = (sk.params.alpha * sk.params.eta / 64.0) *
               std::sqrt(static_cast<double>(sk.params.tau_epoch) / 3.0);
  CHECK(lower_bound_rhs(sk.params) == doctest::Approx(rhs).epsilon(1e-12));

  c.experiment = Experiment::LowerBoundOnePass;
  LowerBoundSetup op = make_lower_bound_setup(c);
  CHECK(op.params.variant == Variant::OnePass);
  CHECK(op.schedule_kind == ScheduleKind::OnePass);
  CHECK(op.params.n == 32);
  CHECK(op.params.d == 160);  // n * ceil(8 log2 n) / 8
  CHECK(op.packing.m() == 64);
  CHECK(op.packing.kind == PackingKind::SignedEighth);
  CHECK(op.trials == 2400);
  CHECK(op.params.T == 32);
  CHECK(lower_bound_rhs(op.params) == doctest::Approx(1.0 / 365.0).epsilon(1e-12));

  c.experiment = Experiment::LowerBoundWithReplacement;
  LowerBoundSetup wr = make_lower_bound_setup(c);
  CHECK(wr.params.variant == Variant::MultipassSmallK);
  CHECK(wr.schedule_kind == ScheduleKind::WithReplacement);
  CHECK(wr.params.tau_epoch == 48);
  CHECK(wr.params.T == 340);  // ceil(n log2 n) * k
  CHECK(wr.trials == 100);

  ExperimentConfig ov = c;
  ov.experiment = Experiment::LowerBoundSmallK;
  ov.n = 8;
  ov.trials = 7;
  ov.eta_grid = {0.2};
  ov.tau_list = {1, 2};
  LowerBoundSetup sko = make_lower_bound_setup(ov);
  CHECK(sko.params.n == 8);
  CHECK(sko.trials == 7);
  CHECK(sko.eta == 0.2);
  CHECK(sko.tau_list == std::vector<long long>{1, 2});

  ExperimentConfig k3;
  k3.experiment = Experiment::LowerBoundWithReplacement;
  k3.mode = Mode::Scaled;
  k3.k = 3;
  CHECK(make_lower_bound_setup(k3).params.T == 102);
}

TEST_CASE("lower-bound smoke run is thread-invariant with coherent counters") {
  ExperimentConfig c;
  c.experiment = Experiment::LowerBoundSmallK;
  c.mode = Mode::Scaled;
  c.seed = 5;
  c.trials = 6;
  c.threads = 1;
  LowerBoundSummary a = run_lower_bound(c);
  c.threads = 4;
  LowerBoundSummary b = run_lower_bound(c);

  REQUIRE(a.records.size() == 6);
  REQUIRE(b.records.size() == 6);
  double rhs = lower_bound_rhs(make_lower_bound_setup(c).params);
  long long good = 0, succ = 0, fails = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const TrialRecord &x = a.records[i], &y = b.records[i];
    CHECK(x.trial_id == static_cast<long long>(i));
    CHECK(x.trial_id == y.trial_id);
    CHECK(x.event_held == y.event_held);
    CHECK(x.success == y.success);
    CHECK(x.F_hat == y.F_hat);
    CHECK(x.FS_hat == y.FS_hat);
    CHECK(x.max_norm == y.max_norm);
    CHECK(x.steps_to_idle == y.steps_to_idle);
    if (x.success) CHECK(x.event_held);
    CHECK(std::fabs(x.F_zero - x.FS_zero) <= 1e-12);
    CHECK(x.bound_rhs == rhs);
    good += x.event_held ? 1 : 0;
    succ += x.success ? 1 : 0;
    fails += (x.event_held && !x.success) ? 1 : 0;
  }
  CHECK(a.trials == 6);
  CHECK(a.good_events == good);
  CHECK(a.successes == succ);
  CHECK(a.good_event_failures == fails);
  CHECK(a.conditional_pass == (good > 0 && fails == 0));
  double lo = 0.0, hi = 1.0;
  wilson_interval(succ, 6, 1.96, &lo, &hi);
  CHECK(a.wilson_low == lo);
  CHECK(a.wilson_high == hi);
  if (a.trials > 0)
    CHECK(a.success_rate == static_cast<double>(succ) / 6.0);

  std::stringstream csv;
  write_lower_bound_csv(csv, a, c);
  std::string header;
  std::getline(csv, header);
  CHECK(header ==
        "trial_id,event_held,F_hat,F_zero,FS_hat,FS_zero,bound_rhs,success,"
        "steps_to_idle,projection_count,norm_violations,max_norm,eta,tau,seed,mode,version");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells = split_line(line);
    REQUIRE(cells.size() == 17);
    CHECK(cells[14] == "5");
    CHECK(cells[15] == "scaled");
    CHECK(cells[16] == kVersion);
    ++rows;
  }
  CHECK(rows == 6);
}

TEST_CASE("coupon coverage and sweep and baseline smokes have the pinned shapes") {
  ExperimentConfig c;
  c.experiment = Experiment::CouponCheck;
  c.trials = 30;
  c.seed = 2;
  CouponSummary cs = run_coupon_check(c);
  REQUIRE(cs.rows.size() == 3);
  CHECK(cs.rows[0].n == 16);
  CHECK(cs.rows[0].steps == 64);
  CHECK(cs.rows[0].exact > 0.0);
  CHECK(std::fabs(cs.rows[0].exact - coupon_cover_exact(16, 64)) <= 1e-15);
  CHECK(cs.rows[1].n == 64);
  CHECK(cs.rows[1].steps == 384);
  CHECK(cs.rows[1].exact == -1.0);
  CHECK(cs.rows[2].n == 256);
  CHECK(cs.rows[2].steps == 2048);
  for (const CouponRow& r : cs.rows) {
    CHECK(r.trials == 30);
    CHECK(r.rate >= 0.0);
    CHECK(r.rate <= 1.0);
    CHECK(r.sigma > 0.0);
  }

  ExperimentConfig cov;
  cov.experiment = Experiment::CoverageCheck;
  cov.trials = 40;
  cov.seed = 3;
  CoverageSummary cvs = run_coverage_check(cov);
  CHECK(cvs.n == 10);
  CHECK(cvs.m == 1024);
  CHECK(cvs.delta == 0.5);
  CHECK(cvs.trials == 40);
  CHECK(cvs.exact_n1 == 0.25);
  CHECK(cvs.rate >= 0.0);
  CHECK(cvs.rate <= 1.0);
  CHECK(cvs.rate_n1 >= 0.0);
  CHECK(cvs.rate_n1 <= 1.0);
  ExperimentConfig cov13 = cov;
  cov13.n = 13;
  CHECK_THROWS_AS(run_coverage_check(cov13), ConfigError);

  ExperimentConfig sw;
  sw.experiment = Experiment::SweepRates;
  sw.n = 16;
  sw.trials = 2;
  sw.seed = 4;
  sw.eta_grid = {0.25};
  SweepSummary sws = run_sweep_rates(sw);
  REQUIRE(sws.rows.size() == 5);
  for (int k = 1; k <= 5; ++k) {
    const SweepRow& r = sws.rows[static_cast<std::size_t>(k - 1)];
    CHECK(r.epoch == k);
    CHECK(r.eta == 0.25);
    double nk = 16.0 * k;
    double env = std::min(1.0, 36.0 * (0.25 * std::sqrt(nk) + 1.0 / (0.25 * nk)));
    CHECK(r.envelope == doctest::Approx(env).epsilon(1e-12));
  }

  ExperimentConfig bl;
  bl.experiment = Experiment::BaselineUpper;
  bl.trials = 2;
  bl.seed = 6;
  BaselineSummary bls = run_baseline_upper(bl);
  REQUIRE(bls.rows.size() == 7);
  const char* kinds[] = {"onepass", "multipass5", "onepass", "multipass5",
                         "onepass", "multipass5", "etalimit"};
  long long ns[] = {100, 100, 1000, 1000, 10000, 10000, 1000};
  for (int i = 0; i < 7; ++i) {
    CHECK(bls.rows[static_cast<std::size_t>(i)].kind == kinds[i]);
    CHECK(bls.rows[static_cast<std::size_t>(i)].n == ns[i]);
  }
  double eta5 = 1.0 / std::sqrt(500.0);
  double eu100 = eta5 * std::sqrt(500.0) + 1.0 / (eta5 * 500.0) + eta5 * 500.0 / 100.0;
  CHECK(bls.c_fit == doctest::Approx(1.05 * bls.rows[1].excess / eu100).epsilon(1e-12));
  CHECK(bls.rows[0].eta == 0.1);       // onepass at 1/sqrt(n)
  CHECK(bls.rows[1].eta == eta5);      // five epochs at 1/sqrt(5n)
  CHECK(bls.slope_pass == (bls.slope >= -0.65 && bls.slope <= -0.35));
  CHECK(bls.pass == (bls.slope_pass && bls.multipass_pass && bls.etalimit_pass));
  bool mp_ok = true;
  for (const BaselineRow& r : bls.rows)
    if (r.kind == "multipass5" && r.excess > r.envelope) mp_ok = false;
  CHECK(bls.multipass_pass == mp_ok);
}

TEST_CASE("verify suite passes end to end") {
  VerifyReport rep = run_verify_suite(1, 0);
  for (const auto& it : rep.items)
    CHECK_MESSAGE(it.pass, it.name, ": ", it.note);
  CHECK(rep.all_pass);
  CHECK(rep.items.size() >= 15);
}
