#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgdsim/bitvec.hpp"
#include "sgdsim/construction.hpp"
#include "sgdsim/packing.hpp"
#include "sgdsim/rng.hpp"

namespace sgdsim {

// A sample is a subset of the packing rows, drawn by including each row
// independently with probability delta.
using SampleV = BitVec;

struct Dataset {
  int n = 0;
  int m = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::vector<SampleV> samples;
};

SampleV sample_v(int m, double delta, Rng& rng);
Dataset sample_dataset(int m, int n, double delta, std::uint64_t seed);

// Least row index not covered by the union of the given samples; -1 if the
// union is everything.
int find_uncovered(const std::vector<const SampleV*>& sets, int m);

// Least row index present in every given sample; -1 if the intersection is
// empty. Throws OutOfRange on an empty list.
int find_common(const std::vector<const SampleV*>& sets, int m);

struct EventInfo {
  bool held = false;
  int u0 = -1;
  bool coverage = false;  // multipass: window jointly equals the dataset
};

// Multipass good event: the first tau_epoch scheduled samples jointly equal
// the dataset, and some row is uncovered by their union (u0 = least such).
EventInfo good_event_multipass(const Dataset& data, const std::vector<int>& schedule_prefix,
                               int tau_epoch);

// One-pass good event: the first ceil(n/16) samples share a common row
// (u0 = least) and u0 appears in none of the remaining samples.
EventInfo good_event_onepass(const Dataset& data);

// Exact expectation of the loss over a fresh sample: with the raw scores of
// all rows at w sorted descending above the threshold c as s_(1) >= ... >= s_(k),
//   E[max term] = sum_j s_(j) delta (1-delta)^(j-1) + c (1-delta)^k,
// then scaled, plus the regularizer. Throws DimensionMismatch when w, the
// packing, or the parameter set disagree.
double population_loss(const ConstructionParams& p, const Vec& w, const PackingSet& packing,
                       const BlockScheme* scheme = nullptr);

// Mean of eval_f over the dataset rows.
double empirical_loss(const ConstructionParams& p, const Vec& w, const PackingSet& packing,
                      const Dataset& data, const BlockScheme* scheme = nullptr);

// Plain text: header "n m delta seed" (delta in hexfloat), then one 0/1 line
// per sample over the m rows. Round-trips bit-exactly.
void save_dataset(const Dataset& data, std::ostream& out);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(std::istream& in);
Dataset load_dataset(const std::string& path);

}  // namespace sgdsim
