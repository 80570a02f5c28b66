#include "sgdsim/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "sgdsim/errors.hpp"

namespace sgdsim {

SampleV sample_v(int m, double delta, Rng& rng) {
  SampleV v(m);
  for (int i = 0; i < m; ++i)
    if (rng.bernoulli(delta)) v.set(i);
  return v;
}

Dataset sample_dataset(int m, int n, double delta, std::uint64_t seed) {
  if (m < 1 || n < 1) throw OutOfRange("dataset needs positive m and n");
  if (!(delta >= 0.0 && delta <= 1.0)) throw OutOfRange("delta must lie in [0,1]");
  Dataset data;
  data.m = m;
  data.n = n;
  data.delta = delta;
  data.seed = seed;
  Rng rng(seed, kStreamDataset);
  data.samples.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) data.samples.push_back(sample_v(m, delta, rng));
  return data;
}

int find_uncovered(const std::vector<const SampleV*>& sets, int m) {
  BitVec uni(m);
  for (const SampleV* s : sets) {
    if (s->n != m) throw DimensionMismatch("sample width disagrees with m");
    uni.or_with(*s);
  }
  return uni.first_clear();
}

int find_common(const std::vector<const SampleV*>& sets, int m) {
  if (sets.empty()) throw OutOfRange("intersection of an empty family");
  BitVec inter = *sets.front();
  if (inter.n != m) throw DimensionMismatch("sample width disagrees with m");
  for (std::size_t i = 1; i < sets.size(); ++i) {
    if (sets[i]->n != m) throw DimensionMismatch("sample width disagrees with m");
    inter.and_with(*sets[i]);
  }
  return inter.first_set();
}

EventInfo good_event_multipass(const Dataset& data, const std::vector<int>& schedule_prefix,
                               int tau_epoch) {
  if (static_cast<long long>(schedule_prefix.size()) < tau_epoch)
    throw OutOfRange("schedule prefix shorter than the window");
  EventInfo ev;
  std::vector<bool> hit(static_cast<std::size_t>(data.n), false);
  BitVec uni(data.m);
  for (int t = 0; t < tau_epoch; ++t) {
    int id = schedule_prefix[static_cast<std::size_t>(t)];
    if (id < 0 || id >= data.n) throw OutOfRange("schedule index outside the dataset");
    hit[static_cast<std::size_t>(id)] = true;
    uni.or_with(data.samples[static_cast<std::size_t>(id)]);
  }
  ev.coverage = std::all_of(hit.begin(), hit.end(), [](bool b) { return b; });
  ev.u0 = uni.first_clear();
  ev.held = ev.coverage && ev.u0 >= 0;
  return ev;
}

EventInfo good_event_onepass(const Dataset& data) {
  EventInfo ev;
  int q = (data.n + 15) / 16;
  std::vector<const SampleV*> head;
  head.reserve(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) head.push_back(&data.samples[static_cast<std::size_t>(i)]);
  ev.u0 = find_common(head, data.m);
  if (ev.u0 < 0) return ev;
  for (int i = q; i < data.n; ++i)
    if (data.samples[static_cast<std::size_t>(i)].get(ev.u0)) return ev;
  ev.held = true;
  return ev;
}

double population_loss(const ConstructionParams& p, const Vec& w, const PackingSet& packing,
                       const BlockScheme* scheme) {
  std::vector<double> scores = all_scores(p, w, packing);
  std::vector<double> above;
  above.reserve(scores.size());
  for (double s : scores)
    if (s > p.threshold) above.push_back(s);
  std::sort(above.begin(), above.end(), std::greater<double>());
  // The max over an independently thinned row set: the j-th largest score
  // wins exactly when it is included and the j-1 larger ones are not.
  double expect = 0.0;
  double miss = 1.0;  // (1-delta)^(j-1)
  for (double s : above) {
    expect += s * p.delta * miss;
    miss *= 1.0 - p.delta;
  }
  expect += p.threshold * miss;
  return p.scale() * expect + regularizer(p, w, scheme);
}

double empirical_loss(const ConstructionParams& p, const Vec& w, const PackingSet& packing,
                      const Dataset& data, const BlockScheme* scheme) {
  if (data.m != packing.m())
    throw DimensionMismatch("dataset rows " + std::to_string(data.m) + ", packing has " +
                            std::to_string(packing.m()));
  double acc = 0.0;
  for (const SampleV& v : data.samples) acc += eval_f(p, w, v, packing, scheme);
  return acc / static_cast<double>(data.n);
}

void save_dataset(const Dataset& data, std::ostream& out) {
  char delta_hex[64];
  std::snprintf(delta_hex, sizeof delta_hex, "%a", data.delta);
  out << data.n << ' ' << data.m << ' ' << delta_hex << ' ' << data.seed << '\n';
  for (const SampleV& v : data.samples) {
    std::string line(static_cast<std::size_t>(data.m), '0');
    for (int i = 0; i < data.m; ++i)
      if (v.get(i)) line[static_cast<std::size_t>(i)] = '1';
    out << line << '\n';
  }
  if (!out) throw IoError("failed writing dataset");
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  save_dataset(data, f);
}

Dataset load_dataset(std::istream& in) {
  Dataset data;
  std::string delta_text;
  if (!(in >> data.n >> data.m >> delta_text >> data.seed))
    throw IoError("malformed dataset header");
  data.delta = std::strtod(delta_text.c_str(), nullptr);
  std::string line;
  std::getline(in, line);
  for (int s = 0; s < data.n; ++s) {
    if (!std::getline(in, line) || static_cast<int>(line.size()) != data.m)
      throw IoError("dataset sample " + std::to_string(s) + " malformed");
    SampleV v(data.m);
    for (int i = 0; i < data.m; ++i) {
      char c = line[static_cast<std::size_t>(i)];
      if (c != '0' && c != '1') throw IoError("dataset sample has bad character");
      if (c == '1') v.set(i);
    }
    data.samples.push_back(std::move(v));
  }
  return data;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return load_dataset(f);
}

}  // namespace sgdsim
