#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdsim/construction.hpp"
#include "sgdsim/oracle.hpp"

namespace sgdsim {

// Sample orders. Epochs are 1-based: step t belongs to epoch ceil(t/n) and
// sits at position ((t-1) mod n) + 1 within it.
enum class ScheduleKind {
  OnePass,                 // 0..n-1 once
  MultiPassExplicit,       // caller-provided permutations
  MultiPassSingleShuffle,  // one seeded shuffle reused every epoch
  MultiPassMultiShuffle,   // fresh seeded shuffle per epoch
  WithReplacement,         // T independent uniform draws
};

struct Schedule {
  ScheduleKind kind = ScheduleKind::OnePass;
  int n = 0;
  long long T = 0;
  std::uint64_t seed = 0;
  std::vector<int> idx;  // materialized, length T
};

Schedule make_schedule_onepass(int n);
Schedule make_schedule_explicit(int n, const std::vector<std::vector<int>>& perms);
Schedule make_schedule_single_shuffle(int n, long long epochs, std::uint64_t seed);
Schedule make_schedule_multi_shuffle(int n, long long epochs, std::uint64_t seed);
Schedule make_schedule_with_replacement(int n, long long T, std::uint64_t seed);

struct TraceRow {
  long long t = 0;
  Phase phase = Phase::Observing;
  StepBranch branch = StepBranch::Observe;
  double norm_w = 0.0;
  double dot_u0 = 0.0;
};

struct RunResult;

// Gradient callback for the engine. `ids` are the step's sample indices.
class GradientSource {
 public:
  virtual ~GradientSource() = default;
  virtual int dim() const = 0;
  virtual SparseGrad next(const Vec& w, const std::vector<int>& ids, long long t) = 0;
  // Optional hooks for trace annotation and end-of-run bookkeeping.
  virtual void annotate(const Vec&, TraceRow&) const {}
  virtual void finalize(RunResult&) const {}
};

// Adapts an adversarial oracle to the engine.
class OracleSource : public GradientSource {
 public:
  explicit OracleSource(OracleState state) : st_(std::move(state)) {}
  int dim() const override { return st_.params.ambient_dim; }
  SparseGrad next(const Vec& w, const std::vector<int>& ids, long long) override {
    return oracle_step(st_, w, ids);
  }
  void annotate(const Vec& w, TraceRow& row) const override;
  void finalize(RunResult& res) const override;
  OracleState& state() { return st_; }
  const OracleState& state() const { return st_; }

 private:
  OracleState st_;
};

struct RunConfig {
  double eta = 0.0;
  long long T = 0;
  std::vector<long long> tau_list;  // suffix lengths to average over
  double radius = 1.0;              // projection ball radius
  bool record_trace = false;
  // When positive, check ||w_t||^2 <= coeff * (t+1) after every step and
  // count violations (LargeK norm recursion with coeff = 2 eta^2 alpha^2).
  double norm_recursion_coeff = 0.0;
};

struct RunResult {
  std::vector<std::pair<long long, Vec>> suffix_averages;  // (tau, average), tau ascending
  long long projection_count = 0;  // strict shrinks only
  double max_norm = 0.0;
  long long norm_recursion_violations = 0;
  Vec w_final;
  std::vector<TraceRow> trace;

  // Copied from the oracle when the source is adversarial.
  Phase final_phase = Phase::Observing;
  int u0 = -1;
  long long steps_to_idle = -1;
  long long guard_events = 0;
  bool fallback = false;

  const Vec& suffix(long long tau) const;
};

inline void OracleSource::annotate(const Vec& w, TraceRow& row) const {
  row.phase = st_.phase;
  row.branch = st_.last_branch;
  if (st_.u0 < 0 || st_.packing == nullptr) return;
  const PackingSet& pk = *st_.packing;
  int d = pk.d;
  bool two_copies = st_.params.ambient_dim == 2 * d;
  double dot = 0.0;
  for (int i = 0; i < d; ++i) {
    double c = pk.coord(st_.u0, i);
    if (c == 0.0) continue;
    dot += c * (w[i] + (two_copies ? w[d + i] : 0.0));
  }
  row.dot_u0 = dot;
}

inline void OracleSource::finalize(RunResult& res) const {
  res.final_phase = st_.phase;
  res.u0 = st_.u0;
  res.steps_to_idle = st_.steps_to_idle;
  res.guard_events = st_.guard_events;
  res.fallback = (st_.phase == Phase::Fallback);
}

// Projected subgradient descent from w = 0: w_t = Pi(w_{t-1} - eta g_t),
// Pi the Euclidean projection onto the radius ball. Suffix averages are
// accumulated exactly via per-coordinate time integrals, so sparse steps pay
// only for the coordinates they touch. Throws ScheduleExhausted when the
// schedule is shorter than T and DimensionMismatch when the source dimension
// is inconsistent.
RunResult run_sgd(GradientSource& source, const Schedule& schedule, const RunConfig& cfg);

// Plain average of w_{T-tau+1..T} from an explicit trajectory (w_list[t-1] is
// w_t). Throws OutOfRange unless 1 <= tau <= T.
Vec suffix_average(const std::vector<Vec>& w_list, long long tau);

Vec project_ball(const Vec& w, double radius);

std::string to_string(ScheduleKind k);

}  // namespace sgdsim
