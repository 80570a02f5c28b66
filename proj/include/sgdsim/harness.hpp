#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgdsim/construction.hpp"
#include "sgdsim/instance.hpp"
#include "sgdsim/optimizer.hpp"

namespace sgdsim {

enum class Experiment {
  LowerBoundMultipass,        // MultipassLargeK, shuffled epochs
  LowerBoundSmallK,           // MultipassSmallK, shuffled epochs
  LowerBoundOnePass,          // OnePass, natural order
  LowerBoundWithReplacement,  // MultipassSmallK, uniform draws
  CouponCheck,
  CoverageCheck,
  SweepRates,
  BaselineUpper,
  VerifySuite,
};

struct ExperimentConfig {
  Experiment experiment = Experiment::VerifySuite;
  int n = 0;                     // 0 picks the preset value
  double k = 0.0;                // epochs (with-replacement: T = ceil(n log2 n) * k)
  std::vector<double> eta_grid;  // empty picks the preset grid
  int trials = 0;                // 0 picks the preset count
  std::uint64_t seed = 1;
  Mode mode = Mode::Scaled;
  std::vector<long long> tau_list;  // empty picks {1, T/8, T/2, T}
  std::string out;                  // CSV path; empty writes to stdout
  int threads = 0;                  // 0 uses the hardware count
};

struct TrialRecord {
  long long trial_id = 0;
  bool event_held = false;
  double F_hat = 0.0;    // population loss of the suffix average (largest tau)
  double F_zero = 0.0;   // population loss at the origin
  double FS_hat = 0.0;   // empirical counterparts
  double FS_zero = 0.0;
  double bound_rhs = 0.0;
  bool success = false;  // event held and the gap beat the bound at every tau
  long long steps_to_idle = -1;
  long long projection_count = 0;
  long long norm_violations = 0;  // LargeK norm-recursion breaches
  double max_norm = 0.0;
  double eta = 0.0;
  long long tau = 0;     // the tau the F_hat column reports
};

// Everything an adversarial run needs, fully derived from a config.
struct LowerBoundSetup {
  ConstructionParams params;
  PackingSet packing;
  ScheduleKind schedule_kind = ScheduleKind::MultiPassSingleShuffle;
  std::vector<long long> tau_list;
  int trials = 0;
  double eta = 0.0;
};

LowerBoundSetup make_lower_bound_setup(const ExperimentConfig& cfg);

struct LowerBoundSummary {
  std::vector<TrialRecord> records;  // sorted by trial_id
  long long trials = 0;
  long long good_events = 0;
  long long successes = 0;           // unconditional
  long long good_event_failures = 0; // good-event trials that missed the bound
  double success_rate = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
  bool conditional_pass = false;     // every good-event trial succeeded
};

LowerBoundSummary run_lower_bound(const ExperimentConfig& cfg);

// The bound the suffix average must beat, per variant.
double lower_bound_rhs(const ConstructionParams& p);

struct CouponRow {
  int n = 0;
  long long steps = 0;  // n * log2(n)
  long long trials = 0;
  double rate = 0.0;    // fraction of trials covering all n within steps
  double exact = -1.0;  // DP value when computed (n = 16), else -1
  double sigma = 0.0;
};

struct CouponSummary {
  std::vector<CouponRow> rows;
  bool pass = false;  // every rate >= 0.5 - 3 sigma; n=16 within 3 sigma of exact
};

CouponSummary run_coupon_check(const ExperimentConfig& cfg);

// Probability that t uniform draws from [n] hit every value, by exact DP on
// the covered-count chain.
double coupon_cover_exact(int n, long long t);

struct CoverageSummary {
  int n = 0;
  int m = 0;
  double delta = 0.0;
  long long trials = 0;
  double rate = 0.0;        // fraction of datasets whose union covers all rows
  double exact_n1 = 0.0;    // closed form at n=1, m=2, delta=1/2 (= 1/4)
  double rate_n1 = 0.0;     // measured at the same point
  bool pass = false;        // rate <= 0.45 and the n=1 point within 3 sigma
};

// Strict-mode only; throws ConfigError when n > 12.
CoverageSummary run_coverage_check(const ExperimentConfig& cfg);

struct SweepRow {
  double eta = 0.0;
  int epoch = 0;
  double measured = 0.0;  // mean population gap of the end-of-run average
  double envelope = 0.0;  // min(1, 36 (eta sqrt(nk) + 1/(eta nk)))
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  bool epoch1_flat = false;      // epoch-1 gap <= 0.05 * cap
  bool epoch2_jump = false;      // epoch-2 gap >= 2x epoch-1 gap
  bool eta_monotone = false;     // epoch-2 weakly increasing along the grid
  bool pass = false;
};

SweepSummary run_sweep_rates(const ExperimentConfig& cfg);

struct BaselineRow {
  long long n = 0;
  double eta = 0.0;
  std::string kind;      // "onepass", "multipass5", "etalimit"
  double excess = 0.0;   // mean F(w_hat) - F*
  double envelope = 0.0;
};

struct BaselineSummary {
  std::vector<BaselineRow> rows;
  double slope = 0.0;     // log-excess vs log-n fit for the one-pass rows
  double c_fit = 0.0;     // multipass constant fitted at the smallest n
  bool slope_pass = false;
  bool multipass_pass = false;
  bool etalimit_pass = false;
  bool pass = false;
};

// Benign stochastic problem: f(w, z) = |w - z|, z uniform on [-1/2, 1/2],
// iterates kept in [-1, 1]; F(w) = w^2 + 1/4 for |w| <= 1/2, |w| beyond.
BaselineSummary run_baseline_upper(const ExperimentConfig& cfg);

struct VerifyReport {
  struct Item {
    std::string name;
    bool pass = false;
    std::string note;
  };
  std::vector<Item> items;
  bool all_pass = false;
};

// Compact battery over every module plus two injected faults that must be
// caught: a projection radius of 0.5 has to trip the no-projection check, and
// a threshold constant of 44/45 of the true value has to trip the LargeK
// closed-form validity probe.
VerifyReport run_verify_suite(std::uint64_t seed, int threads = 0);

// CSV helpers: UTF-8, header row, shortest round-trip doubles; every row ends
// with seed, mode, and the version string.
void write_lower_bound_csv(std::ostream& out, const LowerBoundSummary& s,
                           const ExperimentConfig& cfg);
void write_coupon_csv(std::ostream& out, const CouponSummary& s, const ExperimentConfig& cfg);
void write_coverage_csv(std::ostream& out, const CoverageSummary& s, const ExperimentConfig& cfg);
void write_sweep_csv(std::ostream& out, const SweepSummary& s, const ExperimentConfig& cfg);
void write_baseline_csv(std::ostream& out, const BaselineSummary& s, const ExperimentConfig& cfg);

std::string format_double(double x);  // shortest round-trip decimal

// Config file: one key=value per line, '#' comments; keys mirror the CLI
// flags (experiment, n, k, eta, trials, seed, mode, tau, out, threads).
// Unknown keys raise ConfigError. CLI flags override file values.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);

std::string to_string(Experiment e);
Experiment experiment_from(const std::string& name);

// Wilson score interval for a binomial proportion.
void wilson_interval(long long successes, long long trials, double z,
                     double* low, double* high);

// Maps (trials, worker) over a bounded pool; results land at their index.
// Deterministic regardless of thread count.
void parallel_for(long long count, int threads, const std::function<void(long long)>& body);

}  // namespace sgdsim
