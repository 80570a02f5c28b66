#include <CLI11.hpp>
#include <deque>
#include <fstream>
#include <iostream>
#include <string>

#include "sgdsim/errors.hpp"
#include "sgdsim/harness.hpp"
#include "sgdsim/version.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

struct FlagSet {
  std::string config, n, k, eta, trials, seed, mode, tau, out, threads;
};

void add_common_flags(CLI::App* cmd, FlagSet& f) {
  cmd->add_option("--config", f.config, "key=value config file, overridden by flags");
  cmd->add_option("--n", f.n, "dataset size (0 keeps the preset)");
  cmd->add_option("--k", f.k, "epoch count");
  cmd->add_option("--eta", f.eta, "comma-separated step sizes");
  cmd->add_option("--trials", f.trials, "Monte Carlo trials (0 keeps the preset)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--mode", f.mode, "strict or scaled");
  cmd->add_option("--tau", f.tau, "comma-separated suffix lengths");
  cmd->add_option("--out", f.out, "CSV output path (default stdout)");
  cmd->add_option("--threads", f.threads, "worker threads (0 = hardware)");
}

sgdsim::ExperimentConfig build_config(const CLI::App* cmd, const FlagSet& f) {
  sgdsim::ExperimentConfig cfg;
  if (cmd->count("--config")) cfg = sgdsim::parse_config_file(f.config);
  auto apply = [&](const char* flag, const char* key, const std::string& value) {
    if (cmd->count(flag)) sgdsim::apply_config_line(cfg, key, value);
  };
  apply("--n", "n", f.n);
  apply("--k", "k", f.k);
  apply("--eta", "eta", f.eta);
  apply("--trials", "trials", f.trials);
  apply("--seed", "seed", f.seed);
  apply("--mode", "mode", f.mode);
  apply("--tau", "tau", f.tau);
  apply("--out", "out", f.out);
  apply("--threads", "threads", f.threads);
  return cfg;
}

// Route the CSV to --out or stdout; summaries go to stderr either way.
template <typename WriteFn>
void emit_csv(const sgdsim::ExperimentConfig& cfg, WriteFn&& write) {
  if (cfg.out.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(cfg.out);
  if (!out) throw sgdsim::IoError("cannot open output file: " + cfg.out);
  write(out);
}

int run_lower_bound_cmd(sgdsim::ExperimentConfig cfg) {
  sgdsim::LowerBoundSummary sum = sgdsim::run_lower_bound(cfg);
  emit_csv(cfg, [&](std::ostream& out) { sgdsim::write_lower_bound_csv(out, sum, cfg); });
  std::cerr << sgdsim::to_string(cfg.experiment) << ": trials " << sum.trials
            << ", good events " << sum.good_events << ", successes " << sum.successes
            << " (rate " << sgdsim::format_double(sum.success_rate) << ", wilson ["
            << sgdsim::format_double(sum.wilson_low) << ", "
            << sgdsim::format_double(sum.wilson_high) << "]), good-event misses "
            << sum.good_event_failures << '\n';
  return sum.conditional_pass ? kExitPass : kExitCheckFailed;
}

int run_coupon_cmd(const sgdsim::ExperimentConfig& cfg) {
  sgdsim::CouponSummary sum = sgdsim::run_coupon_check(cfg);
  emit_csv(cfg, [&](std::ostream& out) { sgdsim::write_coupon_csv(out, sum, cfg); });
  for (const sgdsim::CouponRow& r : sum.rows)
    std::cerr << "coupon: n " << r.n << ", steps " << r.steps << ", rate "
              << sgdsim::format_double(r.rate)
              << (r.exact >= 0.0 ? ", exact " + sgdsim::format_double(r.exact) : "") << '\n';
  return sum.pass ? kExitPass : kExitCheckFailed;
}

int run_coverage_cmd(const sgdsim::ExperimentConfig& cfg) {
  sgdsim::CoverageSummary sum = sgdsim::run_coverage_check(cfg);
  emit_csv(cfg, [&](std::ostream& out) { sgdsim::write_coverage_csv(out, sum, cfg); });
  std::cerr << "coverage: rate " << sgdsim::format_double(sum.rate) << " (bound 0.45), n=1 rate "
            << sgdsim::format_double(sum.rate_n1) << " vs exact "
            << sgdsim::format_double(sum.exact_n1) << '\n';
  return sum.pass ? kExitPass : kExitCheckFailed;
}

int run_sweep_cmd(const sgdsim::ExperimentConfig& cfg) {
  sgdsim::SweepSummary sum = sgdsim::run_sweep_rates(cfg);
  emit_csv(cfg, [&](std::ostream& out) { sgdsim::write_sweep_csv(out, sum, cfg); });
  std::cerr << "sweep: epoch1 flat " << (sum.epoch1_flat ? "yes" : "no") << ", epoch2 jump "
            << (sum.epoch2_jump ? "yes" : "no") << ", eta monotone "
            << (sum.eta_monotone ? "yes" : "no") << '\n';
  return sum.pass ? kExitPass : kExitCheckFailed;
}

int run_baseline_cmd(const sgdsim::ExperimentConfig& cfg) {
  sgdsim::BaselineSummary sum = sgdsim::run_baseline_upper(cfg);
  emit_csv(cfg, [&](std::ostream& out) { sgdsim::write_baseline_csv(out, sum, cfg); });
  std::cerr << "baseline: slope " << sgdsim::format_double(sum.slope) << " (want [-0.65, -0.35])"
            << ", multipass bound " << (sum.multipass_pass ? "ok" : "violated") << '\n';
  return sum.pass ? kExitPass : kExitCheckFailed;
}

sgdsim::PackingKind parse_kind_flag(const std::string& s) {
  if (s == "binary716") return sgdsim::PackingKind::Binary716;
  if (s == "signed-eighth") return sgdsim::PackingKind::SignedEighth;
  return sgdsim::packing_kind_from(s);  // the canonical file-format names
}

int run_verify_cmd(const sgdsim::ExperimentConfig& cfg) {
  sgdsim::VerifyReport rep = sgdsim::run_verify_suite(cfg.seed, cfg.threads);
  for (const auto& it : rep.items)
    std::cout << (it.pass ? "pass" : "FAIL") << "  " << it.name << "  (" << it.note << ")\n";
  std::cout << (rep.all_pass ? "all checks passed" : "some checks FAILED") << '\n';
  return rep.all_pass ? kExitPass : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulator for adversarial stochastic convex optimization instances"};
  app.set_version_flag("--version", std::string(sgdsim::kVersion));
  app.require_subcommand(1);

  // gen-packing has its own surface; everything else shares the flag set.
  auto* gen = app.add_subcommand("gen-packing", "draw and certify a packing family");
  std::string gen_kind = "binary716", gen_out;
  int gen_d = 1024, gen_m = 256;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "binary716 or signed-eighth");
  gen->add_option("--d", gen_d, "ambient dimension (multiple of 16)");
  gen->add_option("--m", gen_m, "family size");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output path (default stdout)");

  struct SubCmd {
    CLI::App* cmd;
    sgdsim::Experiment experiment;
    FlagSet flags;
  };
  // CLI11 keeps pointers into each FlagSet, so the elements must never move.
  std::deque<SubCmd> subs;
  auto add_sub = [&](const char* name, const char* help, sgdsim::Experiment e) {
    subs.push_back({app.add_subcommand(name, help), e, {}});
    add_common_flags(subs.back().cmd, subs.back().flags);
  };
  add_sub("lower-bound", "adversarial suffix-average lower-bound trials",
          sgdsim::Experiment::LowerBoundMultipass);
  std::string lb_variant = "multipass";
  subs[0].cmd->add_option("--variant", lb_variant,
                          "multipass, smallk, onepass, or with-replacement");
  add_sub("coupon", "coupon-collector coverage rates", sgdsim::Experiment::CouponCheck);
  add_sub("coverage", "dataset union coverage probability", sgdsim::Experiment::CoverageCheck);
  add_sub("sweep", "epoch/step-size phase-transition sweep", sgdsim::Experiment::SweepRates);
  add_sub("baseline", "benign 1-D upper-bound rates", sgdsim::Experiment::BaselineUpper);
  add_sub("verify", "library self-checks plus injected faults",
          sgdsim::Experiment::VerifySuite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfigError;
  }

  try {
    if (gen->parsed()) {
      sgdsim::PackingKind kind = parse_kind_flag(gen_kind);
      sgdsim::PackingSet pk = sgdsim::generate_packing(kind, gen_d, gen_m, gen_seed);
      sgdsim::PackingReport rep = sgdsim::verify_packing(pk);
      if (gen_out.empty()) {
        sgdsim::save_packing(pk, std::cout);
      } else {
        sgdsim::save_packing(pk, gen_out);
      }
      std::cerr << "packing: kind " << sgdsim::to_string(pk.kind) << ", d " << pk.d << ", m "
                << pk.m() << ", pair stat range [" << rep.pair_min << ", " << rep.pair_max
                << "] within [" << rep.pair_bound_lo << ", " << rep.pair_bound_hi << "]\n";
      return rep.ok ? kExitPass : kExitCheckFailed;
    }
    for (SubCmd& sub : subs) {
      if (!sub.cmd->parsed()) continue;
      sgdsim::ExperimentConfig cfg = build_config(sub.cmd, sub.flags);
      cfg.experiment = sub.experiment;
      if (sub.experiment == sgdsim::Experiment::LowerBoundMultipass) {
        if (lb_variant == "multipass") {
          cfg.experiment = sgdsim::Experiment::LowerBoundMultipass;
        } else if (lb_variant == "smallk") {
          cfg.experiment = sgdsim::Experiment::LowerBoundSmallK;
        } else if (lb_variant == "onepass") {
          cfg.experiment = sgdsim::Experiment::LowerBoundOnePass;
        } else if (lb_variant == "with-replacement") {
          cfg.experiment = sgdsim::Experiment::LowerBoundWithReplacement;
        } else {
          throw sgdsim::ConfigError("unknown lower-bound variant: " + lb_variant);
        }
        return run_lower_bound_cmd(cfg);
      }
      switch (sub.experiment) {
        case sgdsim::Experiment::CouponCheck: return run_coupon_cmd(cfg);
        case sgdsim::Experiment::CoverageCheck: return run_coverage_cmd(cfg);
        case sgdsim::Experiment::SweepRates: return run_sweep_cmd(cfg);
        case sgdsim::Experiment::BaselineUpper: return run_baseline_cmd(cfg);
        case sgdsim::Experiment::VerifySuite: return run_verify_cmd(cfg);
        default: break;
      }
    }
    throw sgdsim::ConfigError("no subcommand selected");
  } catch (const sgdsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const sgdsim::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}
