#include "retlab/corpus.hpp"

#include <cmath>
#include <cstdio>

namespace retlab {

namespace {

constexpr uint64_t kPhaseInstructions = 8'000'000;

SyntheticParams gap_workload(double gap_ns, double write_fraction,
                             double streaming_fraction, uint64_t instr_per_event,
                             uint64_t seed) {
  SyntheticParams p;
  p.working_set_lines = 512;  // one L1 worth; the generator sizes the pool
  p.write_fraction = write_fraction;
  p.reuse_gap_mean_ns = gap_ns;
  p.streaming_fraction = streaming_fraction;
  p.event_count = std::max<uint64_t>(2000, kPhaseInstructions / instr_per_event);
  p.instr_per_event_mean = instr_per_event;
  p.seed = seed;
  return p;
}

}  // namespace

std::vector<std::pair<std::string, Workload>> make_study_corpus(uint64_t seed) {
  // Gap levels with memory intensities that keep the implied hot pool inside
  // the L1; short gaps are write-dense (where relaxed retention pays), long
  // gaps are sparse (where the base unit is the right answer).
  struct Level {
    double gap_ns;
    uint64_t instr_per_event;
  };
  const Level levels[] = {
      {500, 10},      {800, 12},       {3000, 16},     {5000, 20},
      {10000, 28},    {18000, 40},     {30000, 56},    {50000, 100},
      {70000, 140},   {90000, 180},    {150000, 300},  {400000, 800},
      {1000000, 2000}, {2000000, 4000},
  };
  struct Variant {
    double write_fraction;
    double streaming_fraction;
  };
  const Variant variants[] = {
      {0.35, 0.0}, {0.5, 0.08}, {0.65, 0.0}, {0.45, 0.04}};

  std::vector<std::pair<std::string, Workload>> corpus;
  int idx = 0;
  char id[32];
  for (const auto& lv : levels) {
    for (const auto& va : variants) {
      SyntheticParams p = gap_workload(lv.gap_ns, va.write_fraction,
                                       va.streaming_fraction, lv.instr_per_event,
                                       seed + 101 * idx);
      std::snprintf(id, sizeof(id), "w%02d", idx);
      corpus.emplace_back(id, generate_synthetic(p));
      ++idx;
    }
  }

  // Two-pool mixes: a write-hot short-gap pool dominates the traffic while a
  // smaller mid-gap pool decides how much longer retention buys.
  const double mix_gap_b[] = {25000, 30000, 45000, 60000};
  for (int m = 0; m < 4; ++m) {
    SyntheticParams a = gap_workload(4000, 0.7, 0.0, 25, seed + 9001 + m);
    SyntheticParams b =
        gap_workload(mix_gap_b[m], 0.7, 0.0, 656, seed + 9101 + m);
    Workload fusioned = fuse(generate_synthetic(a), generate_synthetic(b),
                             uint64_t(1) << 24);
    std::snprintf(id, sizeof(id), "mix%02d", m);
    corpus.emplace_back(id, std::move(fusioned));
    ++idx;
  }
  return corpus;
}

}  // namespace retlab
