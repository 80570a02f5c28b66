#include "sgdsim/construction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

#include "sgdsim/errors.hpp"
#include "sgdsim/rng.hpp"

namespace sgdsim {

double ConstructionParams::scale() const {
  switch (variant) {
    case Variant::MultipassLargeK: return 1.0 / std::sqrt(static_cast<double>(d_prime));
    case Variant::MultipassSmallK: return 1.0 / std::sqrt(static_cast<double>(d));
    case Variant::OnePass: return 1.0;
  }
  return 1.0;
}

double ConstructionParams::shift() const {
  if (variant != Variant::MultipassSmallK) return 0.0;
  return 5.0 * eta * alpha / (7.0 * std::sqrt(static_cast<double>(B)));
}

double ConstructionParams::quantum() const {
  if (variant == Variant::MultipassLargeK) return eta * alpha;
  return eta * alpha / std::sqrt(static_cast<double>(B));
}

long long ConstructionParams::t_effective() const {
  if (variant != Variant::MultipassLargeK) return T;
  long long cube = static_cast<long long>(d_prime) * d_prime * d_prime;
  return std::min(T, cube);
}

namespace {

int pow2_at_least(int x) {
  int p = 1;
  while (p < x) p <<= 1;
  return p;
}

// ceil(8 log2 n) via exact integer comparison 2^t >= n^8.
int block_len_onepass(int n) {
  unsigned __int128 n8 = 1;
  for (int i = 0; i < 8; ++i) n8 *= static_cast<unsigned __int128>(n);
  int t = 0;
  while ((static_cast<unsigned __int128>(1) << t) < n8) ++t;
  return t;
}

void check_common(int n, int d, double eta, double delta) {
  if (n < 1) throw InvalidRegime("dataset size must be positive");
  if (d < 16 || d % 16 != 0)
    throw InvalidRegime("dimension must be a positive multiple of 16, got " + std::to_string(d));
  if (eta < 0.0) throw InvalidRegime("step size must be nonnegative");
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidRegime("delta must lie in [0,1]");
}

}  // namespace

ConstructionParams derive_params(Variant variant, int n, double K, int tau_epoch,
                                 int d, double eta, double delta, bool relax_regime) {
  check_common(n, d, eta, delta);
  ConstructionParams p;
  p.variant = variant;
  p.n = n;
  p.d = d;
  p.eta = eta;
  p.delta = delta;

  if (variant == Variant::OnePass) {
    if (!relax_regime && n < 17) throw InvalidRegime("one-pass regime needs n >= 17");
    p.K = 1.0;
    p.T = n;
    p.tau_epoch = (n + 15) / 16;
    p.d_prime = d;
    p.B = block_len_onepass(n);
    p.ambient_dim = 2 * d;
    double root_n = std::sqrt(static_cast<double>(n));
    p.alpha = eta > 0.0 ? std::min(1.0, 1.0 / (eta * root_n)) : 1.0;
    p.threshold = 9.0 * p.alpha * eta * root_n / (32.0 * std::sqrt(2.0));
    return p;
  }

  if (tau_epoch < 1) throw InvalidRegime("tau_epoch must be positive");
  if (K <= 0.0) throw InvalidRegime("epoch count must be positive");
  p.K = K;
  p.tau_epoch = tau_epoch;
  double t_real = K * static_cast<double>(tau_epoch);
  p.T = std::llround(t_real);
  if (p.T < 1) throw InvalidRegime("derived step budget is empty");

  if (variant == Variant::MultipassLargeK) {
    if (!relax_regime) {
      if (K < 34.0) throw InvalidRegime("large-K regime needs K >= 34");
      if (tau_epoch < 24) throw InvalidRegime("large-K regime needs tau_epoch >= 24");
    }
    p.d_prime = pow2_at_least(d);
    p.ambient_dim = p.d_prime;
    long long t_eff = p.t_effective();
    if (34 > t_eff) throw InvalidRegime("step budget too small to place a block size");
    // Largest power of two r with 34 r^3 <= min(T, d'^3); then B = d'/r, which
    // sandwiches d' <= B (T_eff/34)^(1/3) < 2d' with exact integer arithmetic.
    long long r = 1;
    while (34 * (2 * r) * (2 * r) * (2 * r) <= t_eff && 2 * r <= p.d_prime) r *= 2;
    p.B = static_cast<int>(p.d_prime / r);
    double t_cap = static_cast<double>(t_eff);
    p.alpha = eta > 0.0 ? std::min(1.0 / (eta * std::sqrt(2.0 * t_cap)), 1.0) : 1.0;
    double dp = static_cast<double>(p.d_prime);
    double bb = static_cast<double>(p.B);
    p.threshold = 45.0 * eta * p.alpha * dp * dp / (512.0 * bb * std::sqrt(bb));
    return p;
  }

  // MultipassSmallK
  if (!relax_regime) {
    if (K < 2.0 || K > 34.0) throw InvalidRegime("small-K regime needs 2 <= K <= 34");
    if (tau_epoch < 24) throw InvalidRegime("small-K regime needs tau_epoch >= 24");
  }
  if ((3LL * d) % tau_epoch != 0)
    throw InvalidRegime("tau_epoch must divide 3d to give an integral block size");
  p.B = static_cast<int>(3LL * d / tau_epoch);
  p.d_prime = d;
  p.ambient_dim = 2 * d;
  p.alpha = eta > 0.0 ? std::min(1.0, 1.0 / (eta * std::sqrt(static_cast<double>(p.T)))) : 1.0;
  p.threshold = 5.0 * p.alpha * eta * static_cast<double>(d) /
                (16.0 * std::sqrt(static_cast<double>(p.B)));
  return p;
}

BlockScheme make_blocks(const ConstructionParams& p, const PackingSet& packing, int u0) {
  if (u0 < 0 || u0 >= packing.m()) throw OutOfRange("u0 outside the packing");
  BlockScheme scheme;
  std::vector<int> support;
  if (p.variant == Variant::OnePass) {
    support.resize(static_cast<std::size_t>(p.d));
    for (int i = 0; i < p.d; ++i) support[static_cast<std::size_t>(i)] = i;
  } else {
    for (int i = 0; i < packing.d; ++i)
      if (packing.rows[static_cast<std::size_t>(u0)].get(i)) support.push_back(i);
  }
  int width = p.B;
  for (std::size_t start = 0; start < support.size(); start += static_cast<std::size_t>(width)) {
    std::size_t stop = std::min(support.size(), start + static_cast<std::size_t>(width));
    scheme.blocks.emplace_back(support.begin() + static_cast<long>(start),
                               support.begin() + static_cast<long>(stop));
  }
  return scheme;
}

namespace {

void check_shapes(const ConstructionParams& p, const Vec& w, const PackingSet& packing) {
  if (w.size() != p.ambient_dim)
    throw DimensionMismatch("iterate has dimension " + std::to_string(w.size()) +
                            ", parameters expect " + std::to_string(p.ambient_dim));
  int want = p.variant == Variant::MultipassLargeK ? p.d_prime : p.d;
  if (packing.d != want)
    throw DimensionMismatch("packing dimension " + std::to_string(packing.d) +
                            " does not match parameters (" + std::to_string(want) + ")");
  PackingKind want_kind = p.variant == Variant::OnePass ? PackingKind::SignedEighth
                                                        : PackingKind::Binary716;
  if (packing.kind != want_kind)
    throw DimensionMismatch("packing kind " + to_string(packing.kind) +
                            " does not match the construction");
}

double row_score(const ConstructionParams& p, const Vec& w, const PackingSet& packing,
                 int v, double onepass_total) {
  const BitVec& row = packing.rows[static_cast<std::size_t>(v)];
  double s = 0.0;
  switch (p.variant) {
    case Variant::MultipassLargeK:
      for (std::size_t k = 0; k < row.w.size(); ++k) {
        std::uint64_t bits = row.w[k];
        while (bits) {
          int i = static_cast<int>(k * 64) + __builtin_ctzll(bits);
          s += w[i];
          bits &= bits - 1;
        }
      }
      return s;
    case Variant::MultipassSmallK: {
      for (std::size_t k = 0; k < row.w.size(); ++k) {
        std::uint64_t bits = row.w[k];
        while (bits) {
          int i = static_cast<int>(k * 64) + __builtin_ctzll(bits);
          s += w[i] + w[p.d + i];
          bits &= bits - 1;
        }
      }
      return s + p.shift() * row.count();
    }
    case Variant::OnePass: {
      for (std::size_t k = 0; k < row.w.size(); ++k) {
        std::uint64_t bits = row.w[k];
        while (bits) {
          int i = static_cast<int>(k * 64) + __builtin_ctzll(bits);
          s += w[i] + w[p.d + i];
          bits &= bits - 1;
        }
      }
      // plus-bits summed; the rest enter negatively.
      return (2.0 * s - onepass_total) / std::sqrt(static_cast<double>(p.d));
    }
  }
  return s;
}

double onepass_sigma_total(const ConstructionParams& p, const Vec& w) {
  double t = 0.0;
  for (int i = 0; i < p.d; ++i) t += w[i] + w[p.d + i];
  return t;
}

// Largest value of (sum of k entries)/sqrt(k) over 1 <= k <= cap, entries
// drawn from vals sorted descending. Returns 0 slack handling to the caller.
double best_prefix_ratio(std::vector<double>& vals, int cap) {
  std::sort(vals.begin(), vals.end(), std::greater<double>());
  double best = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  int kmax = static_cast<int>(std::min(vals.size(), static_cast<std::size_t>(std::max(cap, 0))));
  for (int k = 1; k <= kmax; ++k) {
    acc += vals[static_cast<std::size_t>(k - 1)];
    double cand = acc / std::sqrt(static_cast<double>(k));
    if (cand > best) best = cand;
  }
  return best;
}

// Sum of the B smallest entries of w (LargeK block hinge).
double smallest_block_sum(const Vec& w, int B) {
  std::vector<double> vals(w.data(), w.data() + w.size());
  std::nth_element(vals.begin(), vals.begin() + (B - 1), vals.end());
  double s = 0.0;
  for (int i = 0; i < B; ++i) s += vals[static_cast<std::size_t>(i)];
  return s;
}

// Best ordered-pair hinge over all size-B sets I entirely before J: scan the
// cut position, tracking the cheapest B-prefix subset and the richest
// B-suffix subset with two heaps.
double best_pair_hinge_global(const Vec& w, int B) {
  int d = static_cast<int>(w.size());
  if (2 * B > d) return -std::numeric_limits<double>::infinity();
  // min_prefix[c] = smallest sum of B entries among w[0..c)
  std::vector<double> min_prefix(static_cast<std::size_t>(d + 1), 0.0);
  {
    std::priority_queue<double> heap;  // max-heap of the kept (smallest) entries
    double sum = 0.0;
    for (int c = 1; c <= d; ++c) {
      double x = w[c - 1];
      if (static_cast<int>(heap.size()) < B) {
        heap.push(x);
        sum += x;
      } else if (x < heap.top()) {
        sum += x - heap.top();
        heap.pop();
        heap.push(x);
      }
      min_prefix[static_cast<std::size_t>(c)] = sum;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  {
    std::priority_queue<double, std::vector<double>, std::greater<double>> heap;
    double sum = 0.0;
    for (int c = d - 1; c >= B; --c) {
      double x = w[c];
      if (static_cast<int>(heap.size()) < B) {
        heap.push(x);
        sum += x;
      } else if (x > heap.top()) {
        sum += x - heap.top();
        heap.pop();
        heap.push(x);
      }
      if (static_cast<int>(heap.size()) == B) {
        double cand = sum - min_prefix[static_cast<std::size_t>(c)];
        if (cand > best) best = cand;
      }
    }
  }
  return best / std::sqrt(static_cast<double>(B));
}

double pair_hinge_scheme(const Vec& w, const BlockScheme& scheme) {
  double best = -std::numeric_limits<double>::infinity();
  double min_before = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < scheme.blocks.size(); ++b) {
    const std::vector<int>& blk = scheme.blocks[b];
    double s = 0.0;
    for (int i : blk) s += w[i];
    s /= std::sqrt(static_cast<double>(blk.size()));
    if (b > 0 && min_before < std::numeric_limits<double>::infinity()) {
      double cand = s - min_before;
      if (cand > best) best = cand;
    }
    if (s < min_before) min_before = s;
  }
  return best;
}

}  // namespace

double score_of(const ConstructionParams& p, const Vec& w, const PackingSet& packing, int v) {
  check_shapes(p, w, packing);
  if (v < 0 || v >= packing.m()) throw OutOfRange("row index outside the packing");
  double total = p.variant == Variant::OnePass ? onepass_sigma_total(p, w) : 0.0;
  return row_score(p, w, packing, v, total);
}

std::vector<double> all_scores(const ConstructionParams& p, const Vec& w,
                               const PackingSet& packing) {
  check_shapes(p, w, packing);
  double total = p.variant == Variant::OnePass ? onepass_sigma_total(p, w) : 0.0;
  std::vector<double> s(static_cast<std::size_t>(packing.m()));
  for (int v = 0; v < packing.m(); ++v)
    s[static_cast<std::size_t>(v)] = row_score(p, w, packing, v, total);
  return s;
}

double regularizer(const ConstructionParams& p, const Vec& w, const BlockScheme* scheme) {
  switch (p.variant) {
    case Variant::MultipassLargeK: {
      double block = -smallest_block_sum(w, p.B) / std::sqrt(static_cast<double>(p.B));
      double pair = scheme ? pair_hinge_scheme(w, *scheme) : best_pair_hinge_global(w, p.B);
      return p.alpha * std::max(0.0, std::max(block, pair));
    }
    case Variant::MultipassSmallK: {
      std::vector<double> first(w.data(), w.data() + p.d);
      std::vector<double> second(p.d);
      for (int i = 0; i < p.d; ++i) second[static_cast<std::size_t>(i)] = -w[p.d + i];
      int cap = std::min(p.B, p.d);
      double h1 = std::max(0.0, best_prefix_ratio(first, cap));
      double h2 = std::max(0.0, best_prefix_ratio(second, cap));
      return p.alpha * ((5.0 / 7.0) * h1 + (2.0 / 7.0) * h2);
    }
    case Variant::OnePass: {
      std::vector<double> first(w.data(), w.data() + p.d);
      std::vector<double> second(p.d);
      for (int i = 0; i < p.d; ++i) second[static_cast<std::size_t>(i)] = -w[p.d + i];
      int cap = std::min(p.B, p.d);
      double h1 = std::max(0.0, best_prefix_ratio(first, cap));
      double h2 = std::max(0.0, best_prefix_ratio(second, cap));
      return h1 + h2;
    }
  }
  return 0.0;
}

double eval_f(const ConstructionParams& p, const Vec& w, const BitVec& V,
              const PackingSet& packing, const BlockScheme* scheme) {
  check_shapes(p, w, packing);
  if (V.n != packing.m())
    throw DimensionMismatch("sample indexes " + std::to_string(V.n) + " rows, packing has " +
                            std::to_string(packing.m()));
  double total = p.variant == Variant::OnePass ? onepass_sigma_total(p, w) : 0.0;
  double best = p.threshold;
  for (std::size_t k = 0; k < V.w.size(); ++k) {
    std::uint64_t bits = V.w[k];
    while (bits) {
      int v = static_cast<int>(k * 64) + __builtin_ctzll(bits);
      double s = row_score(p, w, packing, v, total);
      if (s > best) best = s;
      bits &= bits - 1;
    }
  }
  return p.scale() * best + regularizer(p, w, scheme);
}

namespace {

// Indices of the k best entries under cmp, ties toward lower index.
std::vector<int> pick_indices(const std::vector<double>& vals, int k, bool largest) {
  std::vector<int> idx(vals.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    double va = vals[static_cast<std::size_t>(a)], vb = vals[static_cast<std::size_t>(b)];
    if (va != vb) return largest ? va > vb : va < vb;
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

// Smallest k attaining the best prefix ratio, with the chosen indices.
std::pair<double, std::vector<int>> best_prefix_piece(const std::vector<double>& vals, int cap) {
  std::vector<int> order = pick_indices(vals, static_cast<int>(vals.size()), true);
  double best = -std::numeric_limits<double>::infinity();
  int best_k = 0;
  double acc = 0.0;
  int kmax = std::min<int>(static_cast<int>(vals.size()), cap);
  for (int k = 1; k <= kmax; ++k) {
    acc += vals[static_cast<std::size_t>(order[static_cast<std::size_t>(k - 1)])];
    double cand = acc / std::sqrt(static_cast<double>(k));
    if (cand > best) {
      best = cand;
      best_k = k;
    }
  }
  order.resize(static_cast<std::size_t>(best_k));
  return {best, std::move(order)};
}

}  // namespace

Vec subgradient_generic(const ConstructionParams& p, const Vec& w, const BitVec& V,
                        const PackingSet& packing, const BlockScheme* scheme) {
  check_shapes(p, w, packing);
  Vec g = Vec::Zero(p.ambient_dim);

  // Sample part: first maximizing row, or nothing when the threshold wins.
  double total = p.variant == Variant::OnePass ? onepass_sigma_total(p, w) : 0.0;
  double best = p.threshold;
  int best_row = -1;
  for (int v = 0; v < V.n; ++v) {
    if (!V.get(v)) continue;
    double s = row_score(p, w, packing, v, total);
    if (s > best) {
      best = s;
      best_row = v;
    }
  }
  if (best_row >= 0) {
    const BitVec& row = packing.rows[static_cast<std::size_t>(best_row)];
    double sc = p.scale();
    if (p.variant == Variant::MultipassLargeK) {
      for (int i = 0; i < packing.d; ++i)
        if (row.get(i)) g[i] += sc;
    } else if (p.variant == Variant::MultipassSmallK) {
      for (int i = 0; i < packing.d; ++i)
        if (row.get(i)) {
          g[i] += sc;
          g[p.d + i] += sc;
        }
    } else {
      double unit = 1.0 / std::sqrt(static_cast<double>(p.d));
      for (int i = 0; i < packing.d; ++i) {
        double e = row.get(i) ? unit : -unit;
        g[i] += e;
        g[p.d + i] += e;
      }
    }
  }

  // Hinge part: first maximizing piece, zero when slack.
  if (p.variant == Variant::MultipassLargeK) {
    std::vector<double> vals(w.data(), w.data() + p.d_prime);
    std::vector<int> low = pick_indices(vals, p.B, false);
    double block = 0.0;
    for (int i : low) block -= vals[static_cast<std::size_t>(i)];
    block /= std::sqrt(static_cast<double>(p.B));
    double pair = scheme ? pair_hinge_scheme(w, *scheme) : best_pair_hinge_global(w, p.B);
    double h = std::max(block, pair);
    if (h > 0.0) {
      double unit = p.alpha / std::sqrt(static_cast<double>(p.B));
      if (block >= pair) {
        for (int i : low) g[i] -= unit;
      } else if (scheme) {
        // Recover the best ordered block pair.
        std::vector<double> sums(scheme->blocks.size(), 0.0);
        for (std::size_t b = 0; b < scheme->blocks.size(); ++b) {
          for (int i : scheme->blocks[b]) sums[b] += w[i];
          sums[b] /= std::sqrt(static_cast<double>(scheme->blocks[b].size()));
        }
        std::size_t bi = 0, bj = 1;
        double best_pair = -std::numeric_limits<double>::infinity();
        std::size_t min_at = 0;
        for (std::size_t b = 1; b < sums.size(); ++b) {
          if (sums[b - 1] < sums[min_at]) min_at = b - 1;
          double cand = sums[b] - sums[min_at];
          if (cand > best_pair) {
            best_pair = cand;
            bi = min_at;
            bj = b;
          }
        }
        double ui = p.alpha / std::sqrt(static_cast<double>(scheme->blocks[bi].size()));
        double uj = p.alpha / std::sqrt(static_cast<double>(scheme->blocks[bj].size()));
        for (int i : scheme->blocks[bi]) g[i] -= ui;
        for (int i : scheme->blocks[bj]) g[i] += uj;
      } else {
        // Recover the best cut for the global form.
        int dp = p.d_prime, B = p.B;
        double best_cut_val = -std::numeric_limits<double>::infinity();
        int best_cut = B;
        for (int c = B; c + B <= dp; ++c) {
          std::vector<double> pre(w.data(), w.data() + c);
          std::vector<double> post(w.data() + c, w.data() + dp);
          std::vector<int> lo = pick_indices(pre, B, false);
          std::vector<int> hi = pick_indices(post, B, true);
          double s = 0.0;
          for (int i : hi) s += post[static_cast<std::size_t>(i)];
          for (int i : lo) s -= pre[static_cast<std::size_t>(i)];
          if (s > best_cut_val) {
            best_cut_val = s;
            best_cut = c;
          }
        }
        std::vector<double> pre(w.data(), w.data() + best_cut);
        std::vector<double> post(w.data() + best_cut, w.data() + dp);
        for (int i : pick_indices(pre, B, false)) g[i] -= unit;
        for (int i : pick_indices(post, B, true)) g[best_cut + i] += unit;
      }
    }
  } else {
    int cap = std::min(p.B, p.d);
    std::vector<double> first(w.data(), w.data() + p.d);
    std::vector<double> second(p.d);
    for (int i = 0; i < p.d; ++i) second[static_cast<std::size_t>(i)] = -w[p.d + i];
    auto [h1, piece1] = best_prefix_piece(first, cap);
    auto [h2, piece2] = best_prefix_piece(second, cap);
    double c1 = p.variant == Variant::MultipassSmallK ? p.alpha * 5.0 / 7.0 : 1.0;
    double c2 = p.variant == Variant::MultipassSmallK ? p.alpha * 2.0 / 7.0 : 1.0;
    if (h1 > 0.0) {
      double unit = c1 / std::sqrt(static_cast<double>(piece1.size()));
      for (int i : piece1) g[i] += unit;
    }
    if (h2 > 0.0) {
      double unit = c2 / std::sqrt(static_cast<double>(piece2.size()));
      for (int i : piece2) g[p.d + i] -= unit;
    }
  }
  return g;
}

double lipschitz_probe(const ConstructionParams& p, const PackingSet& packing,
                       int pairs, std::uint64_t seed, const BlockScheme* scheme) {
  Rng rng(seed, kStreamProbes);
  int dim = p.ambient_dim;
  auto ball_point = [&](double radius) {
    Vec x(dim);
    double nrm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      x[i] = rng.gaussian();
      nrm2 += x[i] * x[i];
    }
    double r = radius * std::pow(rng.real01(), 1.0 / dim) / std::sqrt(nrm2);
    return Vec(x * r);
  };
  double worst = 0.0;
  for (int t = 0; t < pairs; ++t) {
    BitVec V(packing.m());
    for (int v = 0; v < packing.m(); ++v)
      if (rng.bernoulli(p.delta)) V.set(v);
    Vec a = ball_point(1.0), b = ball_point(1.0);
    double gap = std::fabs(eval_f(p, a, V, packing, scheme) - eval_f(p, b, V, packing, scheme));
    double dist = (a - b).norm();
    if (dist > 0.0 && gap / dist > worst) worst = gap / dist;
  }
  return worst;
}

namespace {

std::string hexdouble(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

}  // namespace

void save_params(const ConstructionParams& p, std::ostream& out) {
  out << "variant=" << to_string(p.variant) << '\n'
      << "n=" << p.n << '\n'
      << "K=" << hexdouble(p.K) << '\n'
      << "T=" << p.T << '\n'
      << "tau_epoch=" << p.tau_epoch << '\n'
      << "d=" << p.d << '\n'
      << "d_prime=" << p.d_prime << '\n'
      << "B=" << p.B << '\n'
      << "ambient_dim=" << p.ambient_dim << '\n'
      << "eta=" << hexdouble(p.eta) << '\n'
      << "alpha=" << hexdouble(p.alpha) << '\n'
      << "delta=" << hexdouble(p.delta) << '\n'
      << "threshold=" << hexdouble(p.threshold) << '\n';
  if (!out) throw IoError("failed writing parameters");
}

void save_params(const ConstructionParams& p, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  save_params(p, f);
}

ConstructionParams load_params(std::istream& in) {
  ConstructionParams p;
  std::map<std::string, bool> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("parameter line missing '=': " + line);
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    seen[key] = true;
    if (key == "variant") p.variant = variant_from(val);
    else if (key == "n") p.n = std::stoi(val);
    else if (key == "K") p.K = std::strtod(val.c_str(), nullptr);
    else if (key == "T") p.T = std::stoll(val);
    else if (key == "tau_epoch") p.tau_epoch = std::stoi(val);
    else if (key == "d") p.d = std::stoi(val);
    else if (key == "d_prime") p.d_prime = std::stoi(val);
    else if (key == "B") p.B = std::stoi(val);
    else if (key == "ambient_dim") p.ambient_dim = std::stoi(val);
    else if (key == "eta") p.eta = std::strtod(val.c_str(), nullptr);
    else if (key == "alpha") p.alpha = std::strtod(val.c_str(), nullptr);
    else if (key == "delta") p.delta = std::strtod(val.c_str(), nullptr);
    else if (key == "threshold") p.threshold = std::strtod(val.c_str(), nullptr);
    else throw IoError("unknown parameter key: " + key);
  }
  for (const char* key : {"variant", "n", "K", "T", "tau_epoch", "d", "d_prime", "B",
                          "ambient_dim", "eta", "alpha", "delta", "threshold"})
    if (!seen[key]) throw IoError(std::string("parameter file missing key: ") + key);
  return p;
}

ConstructionParams load_params(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load_params(f);
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::MultipassLargeK: return "MultipassLargeK";
    case Variant::MultipassSmallK: return "MultipassSmallK";
    case Variant::OnePass: return "OnePass";
  }
  return "?";
}

Variant variant_from(const std::string& name) {
  if (name == "MultipassLargeK") return Variant::MultipassLargeK;
  if (name == "MultipassSmallK") return Variant::MultipassSmallK;
  if (name == "OnePass") return Variant::OnePass;
  throw ConfigError("unknown variant: " + name);
}

std::string to_string(Mode m) { return m == Mode::Strict ? "strict" : "scaled"; }

Mode mode_from(const std::string& name) {
  if (name == "strict") return Mode::Strict;
  if (name == "scaled") return Mode::Scaled;
  throw ConfigError("unknown mode: " + name);
}

}  // namespace sgdsim
