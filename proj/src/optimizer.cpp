#include "sgdsim/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "sgdsim/errors.hpp"
#include "sgdsim/rng.hpp"

namespace sgdsim {

namespace {

std::vector<int> identity_perm(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return p;
}

void require_perm(const std::vector<int>& p, int n) {
  if (static_cast<int>(p.size()) != n) throw ConfigError("permutation has wrong length");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int x : p) {
    if (x < 0 || x >= n || seen[static_cast<std::size_t>(x)])
      throw ConfigError("not a permutation of the dataset indices");
    seen[static_cast<std::size_t>(x)] = true;
  }
}

}  // namespace

Schedule make_schedule_onepass(int n) {
  if (n < 1) throw OutOfRange("schedule needs n >= 1");
  Schedule s;
  s.kind = ScheduleKind::OnePass;
  s.n = n;
  s.T = n;
  s.idx = identity_perm(n);
  return s;
}

Schedule make_schedule_explicit(int n, const std::vector<std::vector<int>>& perms) {
  if (n < 1) throw OutOfRange("schedule needs n >= 1");
  if (perms.empty()) throw ConfigError("explicit schedule needs at least one permutation");
  Schedule s;
  s.kind = ScheduleKind::MultiPassExplicit;
  s.n = n;
  s.T = static_cast<long long>(n) * static_cast<long long>(perms.size());
  s.idx.reserve(static_cast<std::size_t>(s.T));
  for (const auto& p : perms) {
    require_perm(p, n);
    s.idx.insert(s.idx.end(), p.begin(), p.end());
  }
  return s;
}

Schedule make_schedule_single_shuffle(int n, long long epochs, std::uint64_t seed) {
  if (n < 1 || epochs < 1) throw OutOfRange("schedule needs n >= 1 and epochs >= 1");
  Schedule s;
  s.kind = ScheduleKind::MultiPassSingleShuffle;
  s.n = n;
  s.T = static_cast<long long>(n) * epochs;
  s.seed = seed;
  Rng rng(seed, kStreamSchedule);
  std::vector<int> perm = identity_perm(n);
  rng.shuffle(perm);
  s.idx.reserve(static_cast<std::size_t>(s.T));
  for (long long e = 0; e < epochs; ++e) s.idx.insert(s.idx.end(), perm.begin(), perm.end());
  return s;
}

Schedule make_schedule_multi_shuffle(int n, long long epochs, std::uint64_t seed) {
  if (n < 1 || epochs < 1) throw OutOfRange("schedule needs n >= 1 and epochs >= 1");
  Schedule s;
  s.kind = ScheduleKind::MultiPassMultiShuffle;
  s.n = n;
  s.T = static_cast<long long>(n) * epochs;
  s.seed = seed;
  Rng rng(seed, kStreamSchedule);
  s.idx.reserve(static_cast<std::size_t>(s.T));
  for (long long e = 0; e < epochs; ++e) {
    std::vector<int> perm = identity_perm(n);
    rng.shuffle(perm);
    s.idx.insert(s.idx.end(), perm.begin(), perm.end());
  }
  return s;
}

Schedule make_schedule_with_replacement(int n, long long T, std::uint64_t seed) {
  if (n < 1 || T < 1) throw OutOfRange("schedule needs n >= 1 and T >= 1");
  Schedule s;
  s.kind = ScheduleKind::WithReplacement;
  s.n = n;
  s.T = T;
  s.seed = seed;
  Rng rng(seed, kStreamSchedule);
  s.idx.reserve(static_cast<std::size_t>(T));
  for (long long t = 0; t < T; ++t)
    s.idx.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  return s;
}

const Vec& RunResult::suffix(long long tau) const {
  for (const auto& [t, v] : suffix_averages)
    if (t == tau) return v;
  throw OutOfRange("suffix length " + std::to_string(tau) + " was not recorded");
}

RunResult run_sgd(GradientSource& source, const Schedule& schedule, const RunConfig& cfg) {
  if (cfg.T < 1) throw OutOfRange("run needs T >= 1");
  if (cfg.T > schedule.T || cfg.T > static_cast<long long>(schedule.idx.size()))
    throw ScheduleExhausted("schedule holds " + std::to_string(schedule.idx.size()) +
                            " steps, run wants " + std::to_string(cfg.T));
  int dim = source.dim();
  if (dim < 1) throw DimensionMismatch("gradient source has no dimension");
  if (cfg.radius <= 0.0) throw OutOfRange("projection radius must be positive");

  std::vector<long long> taus = cfg.tau_list;
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  for (long long tau : taus)
    if (tau < 1 || tau > cfg.T) throw OutOfRange("suffix length must lie in [1, T]");

  // Suffix sums via per-coordinate time integrals: acc[i] carries
  // sum_{t' <= last[i]} w_{t'}[i]; flushing brings it forward to a step.
  Vec w = Vec::Zero(dim);
  Vec acc = Vec::Zero(dim);
  std::vector<long long> last(static_cast<std::size_t>(dim), 0);
  auto flush_coord = [&](int i, long long to) {
    acc[i] += w[i] * static_cast<double>(to - last[static_cast<std::size_t>(i)]);
    last[static_cast<std::size_t>(i)] = to;
  };
  auto flush_all = [&](long long to) {
    for (int i = 0; i < dim; ++i) flush_coord(i, to);
  };

  std::set<long long> snap_times;
  for (long long tau : taus) snap_times.insert(cfg.T - tau);
  std::map<long long, Vec> snaps;
  if (snap_times.count(0)) snaps.emplace(0, acc);

  RunResult res;
  double r2 = cfg.radius * cfg.radius;
  double nrm2 = 0.0;
  std::vector<int> ids(1);

  for (long long t = 1; t <= cfg.T; ++t) {
    ids[0] = schedule.idx[static_cast<std::size_t>(t - 1)];
    SparseGrad g = source.next(w, ids, t);
    if (!g.zero()) {
      for (const auto& [i, v] : g.entries) {
        if (i < 0 || i >= dim) throw DimensionMismatch("gradient entry outside the iterate");
        flush_coord(i, t - 1);
        double before = w[i];
        w[i] -= cfg.eta * v;
        nrm2 += w[i] * w[i] - before * before;
      }
      if (nrm2 > r2 * (1.0 - 1e-9)) {
        nrm2 = w.squaredNorm();  // resync before the projection decision
        if (nrm2 > r2) {
          flush_all(t - 1);
          double s = cfg.radius / std::sqrt(nrm2);
          w *= s;
          nrm2 = r2;
          ++res.projection_count;
        }
      }
      double nrm = std::sqrt(std::max(nrm2, 0.0));
      if (nrm > res.max_norm) res.max_norm = nrm;
    }
    if (cfg.norm_recursion_coeff > 0.0 &&
        nrm2 > cfg.norm_recursion_coeff * static_cast<double>(t + 1))
      ++res.norm_recursion_violations;
    if (cfg.record_trace) {
      TraceRow row;
      row.t = t;
      row.norm_w = std::sqrt(std::max(nrm2, 0.0));
      source.annotate(w, row);
      res.trace.push_back(row);
    }
    auto it = snap_times.find(t);
    if (it != snap_times.end()) {
      flush_all(t);
      snaps.emplace(t, acc);
    }
  }
  flush_all(cfg.T);

  for (long long tau : taus) {
    const Vec& start = snap_times.count(cfg.T - tau) && snaps.count(cfg.T - tau)
                           ? snaps.at(cfg.T - tau)
                           : acc;  // tau == 0 never happens; guarded above
    Vec avg = (acc - start) / static_cast<double>(tau);
    res.suffix_averages.emplace_back(tau, std::move(avg));
  }
  res.w_final = w;
  source.finalize(res);
  return res;
}

Vec suffix_average(const std::vector<Vec>& w_list, long long tau) {
  long long T = static_cast<long long>(w_list.size());
  if (tau < 1 || tau > T) throw OutOfRange("suffix length must lie in [1, T]");
  Vec avg = Vec::Zero(w_list.front().size());
  for (long long t = T - tau; t < T; ++t) avg += w_list[static_cast<std::size_t>(t)];
  return avg / static_cast<double>(tau);
}

Vec project_ball(const Vec& w, double radius) {
  if (radius <= 0.0) throw OutOfRange("projection radius must be positive");
  double nrm = w.norm();
  if (nrm <= radius) return w;
  return w * (radius / nrm);
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::OnePass: return "one-pass";
    case ScheduleKind::MultiPassExplicit: return "explicit";
    case ScheduleKind::MultiPassSingleShuffle: return "single-shuffle";
    case ScheduleKind::MultiPassMultiShuffle: return "multi-shuffle";
    case ScheduleKind::WithReplacement: return "with-replacement";
  }
  return "?";
}

}  // namespace sgdsim
