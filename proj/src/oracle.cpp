#include "sgdsim/oracle.hpp"

#include <cmath>

#include "sgdsim/errors.hpp"

namespace sgdsim {

namespace {

// Branch decisions compare exactly but tolerate accumulated rounding up to
// kGuard; any disagreement between the two verdicts is counted, not hidden.
bool guard_eq(double a, double b, long long& events) {
  bool tol = std::fabs(a - b) <= kGuard;
  if (tol != (a == b)) ++events;
  return tol;
}

bool guard_pos(double a, long long& events) {
  bool tol = a > kGuard;
  if (tol != (a > 0.0)) ++events;
  return tol;
}

bool guard_lt(double a, double b, long long& events) {
  bool tol = a < b - kGuard;
  if (tol != (a < b)) ++events;
  return tol;
}

SparseGrad steering_large_k(OracleState& st, const Vec& w) {
  const auto& blocks = st.blocks.blocks;
  int M = static_cast<int>(blocks.size());
  std::vector<double> s(static_cast<std::size_t>(M), 0.0);
  for (int j = 0; j < M; ++j) {
    double acc = 0.0;
    for (int i : blocks[static_cast<std::size_t>(j)]) acc += w[i];
    s[static_cast<std::size_t>(j)] =
        acc / std::sqrt(static_cast<double>(blocks[static_cast<std::size_t>(j)].size()));
  }
  // Move mass from the first equal-and-positive adjacent pair downhill.
  for (int j = 0; j + 1 < M; ++j) {
    if (guard_eq(s[static_cast<std::size_t>(j)], s[static_cast<std::size_t>(j + 1)],
                 st.guard_events) &&
        guard_pos(s[static_cast<std::size_t>(j)], st.guard_events)) {
      SparseGrad g;
      const auto& lo = blocks[static_cast<std::size_t>(j)];
      const auto& hi = blocks[static_cast<std::size_t>(j + 1)];
      double unit_lo = st.params.alpha / std::sqrt(static_cast<double>(lo.size()));
      double unit_hi = st.params.alpha / std::sqrt(static_cast<double>(hi.size()));
      for (int i : hi) g.entries.emplace_back(i, unit_hi);
      for (int i : lo) g.entries.emplace_back(i, -unit_lo);
      st.last_branch = StepBranch::ShiftPair;
      return g;
    }
  }
  // Otherwise raise the lowest empty block.
  for (int j = 0; j < M; ++j) {
    if (guard_eq(s[static_cast<std::size_t>(j)], 0.0, st.guard_events)) {
      SparseGrad g;
      const auto& blk = blocks[static_cast<std::size_t>(j)];
      double unit = st.params.alpha / std::sqrt(static_cast<double>(blk.size()));
      for (int i : blk) g.entries.emplace_back(i, -unit);
      st.last_branch = StepBranch::RaiseBlock;
      return g;
    }
  }
  st.phase = Phase::Idle;
  st.steps_to_idle = st.step_count;
  st.last_branch = StepBranch::IdleZero;
  return {};
}

SparseGrad steering_small_k(OracleState& st, const Vec& w) {
  const ConstructionParams& p = st.params;
  const BitVec& u = st.packing->rows[static_cast<std::size_t>(st.u0)];
  double q = p.quantum();
  double sh = p.shift();

  std::vector<int> zeros, ones;
  int pending_zeros = 0;
  for (int i = 0; i < p.d; ++i) {
    if (u.get(i)) continue;
    double sigma = w[i] + w[p.d + i] + sh;
    if (guard_pos(sigma, st.guard_events)) {
      ++pending_zeros;
      if (static_cast<int>(zeros.size()) < p.B) zeros.push_back(i);
    }
  }
  // Raises start only on the step that finishes the zeros.
  if (pending_zeros == static_cast<int>(zeros.size())) {
    for (int i = 0; i < p.d && static_cast<int>(ones.size()) < p.B; ++i) {
      if (!u.get(i)) continue;
      double sigma = w[i] + w[p.d + i] + sh;
      if (guard_lt(sigma, q, st.guard_events)) ones.push_back(i);
    }
  }
  if (zeros.empty() && ones.empty()) {
    st.phase = Phase::Idle;
    st.steps_to_idle = st.step_count;
    st.last_branch = StepBranch::IdleZero;
    return {};
  }
  SparseGrad g;
  // Batch vectors are normalized by the full batch width B even when the
  // last batch runs short, keeping every touched coordinate's increment at
  // the same quantum.
  double root_b = std::sqrt(static_cast<double>(p.B));
  double unit_z = p.alpha * (5.0 / 7.0) / root_b;
  double unit_o = p.alpha * (2.0 / 7.0) / root_b;
  for (int i : zeros) g.entries.emplace_back(i, unit_z);
  for (int i : ones) g.entries.emplace_back(p.d + i, -unit_o);
  st.last_branch = StepBranch::LowerRaise;
  return g;
}

SparseGrad steering_one_pass(OracleState& st, const Vec& w) {
  const ConstructionParams& p = st.params;
  const BitVec& u = st.packing->rows[static_cast<std::size_t>(st.u0)];
  std::vector<int> plus, minus;
  for (int i = 0; i < p.d; ++i) {
    double sigma = w[i] + w[p.d + i];
    if (!guard_eq(sigma, 0.0, st.guard_events)) continue;
    if (u.get(i)) {
      if (static_cast<int>(plus.size()) < p.B) plus.push_back(i);
    } else {
      if (static_cast<int>(minus.size()) < p.B) minus.push_back(i);
    }
  }
  if (plus.empty() && minus.empty()) {
    st.phase = Phase::Idle;
    st.steps_to_idle = st.step_count;
    st.last_branch = StepBranch::IdleZero;
    return {};
  }
  SparseGrad g;
  double unit = p.alpha / std::sqrt(static_cast<double>(p.B));
  for (int i : minus) g.entries.emplace_back(i, unit);          // first copy drops
  for (int i : plus) g.entries.emplace_back(p.d + i, -unit);    // second copy climbs
  st.last_branch = StepBranch::LowerRaise;
  return g;
}

}  // namespace

OracleState make_oracle(const ConstructionParams& p, const PackingSet& packing,
                        const Dataset& data) {
  int want = p.variant == Variant::MultipassLargeK ? p.d_prime : p.d;
  if (packing.d != want)
    throw DimensionMismatch("packing dimension " + std::to_string(packing.d) +
                            " does not match parameters (" + std::to_string(want) + ")");
  PackingKind want_kind = p.variant == Variant::OnePass ? PackingKind::SignedEighth
                                                        : PackingKind::Binary716;
  if (packing.kind != want_kind)
    throw DimensionMismatch("packing kind does not match the construction");
  if (data.m != packing.m())
    throw DimensionMismatch("dataset rows " + std::to_string(data.m) + ", packing has " +
                            std::to_string(packing.m()));
  OracleState st;
  st.params = p;
  st.packing = &packing;
  st.data = &data;
  st.window_union = BitVec(packing.m());
  st.window_inter = BitVec(packing.m());
  return st;
}

SparseGrad oracle_step(OracleState& st, const Vec& w, const std::vector<int>& sample_ids) {
  if (!st.packing || !st.data) throw StateCorruption("oracle used before make_oracle");
  if (sample_ids.empty()) throw OutOfRange("a step needs at least one sample");
  if (w.size() != st.params.ambient_dim)
    throw DimensionMismatch("iterate dimension " + std::to_string(w.size()) +
                            ", oracle expects " + std::to_string(st.params.ambient_dim));
  ++st.step_count;
  for (int id : sample_ids) {
    if (id < 0 || id >= st.data->n) throw OutOfRange("sample index outside the dataset");
    st.history.push_back(id);
  }

  long long window = st.params.tau_epoch;
  long long seen = static_cast<long long>(st.history.size());
  if (seen <= window) {
    if (st.phase != Phase::Observing)
      throw StateCorruption("phase advanced inside the observation window");
    for (int id : sample_ids) {
      const SampleV& v = st.data->samples[static_cast<std::size_t>(id)];
      st.window_union.or_with(v);
      if (st.params.variant == Variant::OnePass) {
        if (!st.inter_started) {
          st.window_inter = v;
          st.inter_started = true;
        } else {
          st.window_inter.and_with(v);
        }
      }
    }
    st.last_branch = StepBranch::Observe;
    return {};
  }

  if (st.phase == Phase::Observing) {
    // First step past the window: pick the steering target once.
    int u0 = st.params.variant == Variant::OnePass
                 ? (st.inter_started ? st.window_inter.first_set() : -1)
                 : st.window_union.first_clear();
    if (u0 < 0) {
      st.phase = Phase::Fallback;
    } else {
      st.u0 = u0;
      st.blocks = make_blocks(st.params, *st.packing, u0);
      st.phase = Phase::Steering;
    }
  } else if (st.phase != Phase::Fallback && st.u0 < 0) {
    throw StateCorruption("steering without a target");
  }

  // A target observed after the window voids the construction for good.
  if (st.phase != Phase::Fallback) {
    for (int id : sample_ids)
      if (st.data->samples[static_cast<std::size_t>(id)].get(st.u0)) {
        st.phase = Phase::Fallback;
        break;
      }
  }

  if (st.phase == Phase::Fallback) {
    Vec acc = Vec::Zero(st.params.ambient_dim);
    const BlockScheme* scheme = st.u0 >= 0 ? &st.blocks : nullptr;
    for (int id : sample_ids)
      acc += subgradient_generic(st.params, w, st.data->samples[static_cast<std::size_t>(id)],
                                 *st.packing, scheme);
    acc /= static_cast<double>(sample_ids.size());
    SparseGrad g;
    for (int i = 0; i < acc.size(); ++i)
      if (acc[i] != 0.0) g.entries.emplace_back(i, acc[i]);
    st.last_branch = StepBranch::Fallback;
    return g;
  }

  if (st.phase == Phase::Idle) {
    st.last_branch = StepBranch::IdleZero;
    return {};
  }

  switch (st.params.variant) {
    case Variant::MultipassLargeK: return steering_large_k(st, w);
    case Variant::MultipassSmallK: return steering_small_k(st, w);
    case Variant::OnePass: return steering_one_pass(st, w);
  }
  throw StateCorruption("unreachable variant");
}

Vec to_dense(const SparseGrad& g, int dim) {
  Vec v = Vec::Zero(dim);
  for (const auto& [i, x] : g.entries) v[i] += x;
  return v;
}

ValidationResult validate_subgradient(const ConstructionParams& p, const PackingSet& packing,
                                      const Vec& w, const BitVec& V, const Vec& g,
                                      int probes, double tol, Rng& rng,
                                      const BlockScheme* scheme) {
  ValidationResult res;
  res.ok = true;
  double fw = eval_f(p, w, V, packing, scheme);
  auto check_point = [&](const Vec& point) {
    double lhs = eval_f(p, point, V, packing, scheme);
    double slack = lhs - (fw + g.dot(point - w));
    if (slack < res.worst) res.worst = slack;
    if (slack < -tol) res.ok = false;
    ++res.probes;
  };

  check_point(Vec::Zero(p.ambient_dim));
  check_point(w);
  // One step out and back along every coordinate the gradient touches.
  for (int i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0) continue;
    Vec e = w;
    e[i] += 1.0;
    check_point(e);
    e[i] -= 2.0;
    check_point(e);
  }
  // Random points in the radius-2 ball.
  int dim = p.ambient_dim;
  for (int t = 0; t < probes; ++t) {
    Vec x(dim);
    double nrm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      x[i] = rng.gaussian();
      nrm2 += x[i] * x[i];
    }
    double r = 2.0 * std::pow(rng.real01(), 1.0 / dim) / std::sqrt(nrm2);
    check_point(Vec(x * r));
  }
  return res;
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Observing: return "observing";
    case Phase::Steering: return "steering";
    case Phase::Idle: return "idle";
    case Phase::Fallback: return "fallback";
  }
  return "?";
}

std::string to_string(StepBranch b) {
  switch (b) {
    case StepBranch::Observe: return "obs";
    case StepBranch::ShiftPair: return "shift";
    case StepBranch::RaiseBlock: return "raise";
    case StepBranch::LowerRaise: return "batch";
    case StepBranch::IdleZero: return "idle";
    case StepBranch::Fallback: return "fb";
  }
  return "?";
}

}  // namespace sgdsim
