#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgdsim/bitvec.hpp"
#include "sgdsim/packing.hpp"

namespace sgdsim {

using Vec = Eigen::VectorXd;

// The three loss constructions. Each loss has the shape
//   f(w, V) = scale * max(threshold, max_{v in V} score_v(w)) + regularizer(w)
// where V is a subset of the packing rows, threshold is the raw constant
// inside the max (before scale), and the regularizer is a sum of hinge terms
// over coordinate blocks.
enum class Variant { MultipassLargeK, MultipassSmallK, OnePass };

enum class Mode { Strict, Scaled };

struct ConstructionParams {
  Variant variant = Variant::MultipassLargeK;
  int n = 0;              // dataset size
  double K = 0.0;         // T / tau_epoch (real-valued epoch count)
  long long T = 0;        // total step budget
  int tau_epoch = 0;      // observation window (ceil(n/16) for OnePass)
  int d = 0;              // packing dimension
  int d_prime = 0;        // power-of-two dimension used by MultipassLargeK
  int B = 0;              // block size (OnePass: ceil(8 log2 n))
  int ambient_dim = 0;    // dimension of the iterate
  double eta = 0.0;
  double alpha = 0.0;
  double delta = 0.0;     // per-row inclusion probability of a sample
  double threshold = 0.0; // raw constant inside the per-sample max

  // Multiplier taking a raw score to loss units.
  double scale() const;
  // SmallK per-coordinate additive shift 5*eta*alpha/(7*sqrt(B)).
  double shift() const;
  // Per-coordinate steering increment: eta*alpha/sqrt(B) for SmallK,
  // eta*alpha/sqrt(blk) for OnePass, eta*alpha (a block sum) for LargeK.
  double quantum() const;
  long long t_effective() const;  // min(T, d'^3) for LargeK, else T
};

// Derives the full parameter set from the free knobs.
//   MultipassLargeK: d' = smallest power of two >= d; B = d'/r with r the
//     largest power of two satisfying 34 r^3 <= min(T, d'^3); requires
//     K >= 34 and tau_epoch >= 24 unless relax_regime.
//   MultipassSmallK: B = 3d/tau_epoch (must divide evenly); requires
//     2 <= K <= 34 and tau_epoch >= 24 unless relax_regime.
//   OnePass: T = n, tau_epoch = ceil(n/16), B = ceil(8 log2 n); requires
//     n >= 17 unless relax_regime.
// relax_regime lifts the size floors only; derived relations always hold.
ConstructionParams derive_params(Variant variant, int n, double K, int tau_epoch,
                                 int d, double eta, double delta,
                                 bool relax_regime = false);

// Ordered partition of the steered coordinates into blocks, each sorted
// ascending: LargeK partitions the support of u0 into runs of B (last run may
// be short at odd sizes), SmallK partitions the ones of u0, OnePass uses the
// signed pattern directly and partitions [0, d).
struct BlockScheme {
  std::vector<std::vector<int>> blocks;
};

BlockScheme make_blocks(const ConstructionParams& p, const PackingSet& packing, int u0);

// Raw score of packing row v at w (before scale, threshold not applied).
double score_of(const ConstructionParams& p, const Vec& w, const PackingSet& packing, int v);

// Raw scores of every row at w in row order.
std::vector<double> all_scores(const ConstructionParams& p, const Vec& w,
                               const PackingSet& packing);

// Regularizer value at w, already multiplied by its coefficient. When a
// scheme is given, the LargeK ordered-pair hinge ranges over the scheme's
// blocks; without one it ranges over all size-B index sets I before J.
double regularizer(const ConstructionParams& p, const Vec& w, const BlockScheme* scheme = nullptr);

// Full loss at w for sample V. Empty V takes the threshold branch.
double eval_f(const ConstructionParams& p, const Vec& w, const BitVec& V,
              const PackingSet& packing, const BlockScheme* scheme = nullptr);

// Deterministic subgradient: the first maximizing row in packing order (or
// zero when the threshold branch is active) plus the first maximizing hinge
// piece (value ties broken toward lower indices, zero when a hinge is slack).
Vec subgradient_generic(const ConstructionParams& p, const Vec& w, const BitVec& V,
                        const PackingSet& packing, const BlockScheme* scheme = nullptr);

// Max of |f(w) - f(w')| / |w - w'| over random pairs in the unit ball with a
// fresh random sample each; stays below 3 + 1e-9 for all variants.
double lipschitz_probe(const ConstructionParams& p, const PackingSet& packing,
                       int pairs, std::uint64_t seed, const BlockScheme* scheme = nullptr);

// key=value lines; reals in hexfloat so reloads are bit-exact.
void save_params(const ConstructionParams& p, std::ostream& out);
void save_params(const ConstructionParams& p, const std::string& path);
ConstructionParams load_params(std::istream& in);
ConstructionParams load_params(const std::string& path);

std::string to_string(Variant v);
Variant variant_from(const std::string& name);
std::string to_string(Mode m);
Mode mode_from(const std::string& name);

}  // namespace sgdsim
