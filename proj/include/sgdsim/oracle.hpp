#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgdsim/construction.hpp"
#include "sgdsim/instance.hpp"
#include "sgdsim/rng.hpp"

namespace sgdsim {

// Oracle life cycle. Observing while the history holds at most tau_epoch
// samples; then Steering until the steered pattern is complete; Idle emits
// zeros forever after. Fallback (entered when no suitable u0 exists or u0 is
// observed after the window) hands every step to subgradient_generic and is
// permanent.
enum class Phase { Observing, Steering, Idle, Fallback };

// Which rule produced the step's output (for traces and tests).
enum class StepBranch {
  Observe,     // inside the observation window, output zero
  ShiftPair,   // LargeK: move mass from block j+1 into block j
  RaiseBlock,  // LargeK: raise the lowest empty block
  LowerRaise,  // SmallK/OnePass: lower and/or raise a batch of coordinates
  IdleZero,    // steering complete, output zero
  Fallback,    // generic subgradient of the current sample(s)
};

struct SparseGrad {
  std::vector<std::pair<int, double>> entries;
  bool zero() const { return entries.empty(); }
};

struct OracleState {
  ConstructionParams params;
  const PackingSet* packing = nullptr;
  const Dataset* data = nullptr;

  std::vector<int> history;  // observed sample indices, append-only
  Phase phase = Phase::Observing;
  int u0 = -1;               // fixed once set
  BlockScheme blocks;
  long long step_count = 0;
  long long steps_to_idle = -1;   // step index that entered Idle, -1 if never
  long long guard_events = 0;     // tolerance comparisons that disagreed with ==
  StepBranch last_branch = StepBranch::Observe;

  BitVec window_union;       // union of the window samples, over rows
  BitVec window_inter;       // intersection (OnePass), over rows
  bool inter_started = false;
};

OracleState make_oracle(const ConstructionParams& p, const PackingSet& packing,
                        const Dataset& data);

// Advances the oracle by one step given the current iterate and the step's
// sample indices (several indices average their generic subgradients in
// Fallback; steering output is sample-independent). Appends to history,
// resolves u0 at the first post-window step, and throws StateCorruption if
// the phase/history bookkeeping ever disagrees.
SparseGrad oracle_step(OracleState& st, const Vec& w, const std::vector<int>& sample_ids);

// Branch comparisons are exact up to a defensive absolute guard; whenever the
// guarded verdict differs from exact equality the event is counted on the
// state, never silently absorbed.
inline constexpr double kGuard = 1e-12;

Vec to_dense(const SparseGrad& g, int dim);

struct ValidationResult {
  bool ok = false;
  double worst = 0.0;  // most negative slack seen
  int probes = 0;
};

// Checks f(w') >= f(w) + <g, w' - w> - tol at `probes` points uniform in the
// radius-2 ball plus the deterministic probes: the origin, w itself, and
// w +- e_i for every coordinate i of the blocks touched by g.
ValidationResult validate_subgradient(const ConstructionParams& p, const PackingSet& packing,
                                      const Vec& w, const BitVec& V, const Vec& g,
                                      int probes, double tol, Rng& rng,
                                      const BlockScheme* scheme = nullptr);

std::string to_string(Phase p);
std::string to_string(StepBranch b);

}  // namespace sgdsim
