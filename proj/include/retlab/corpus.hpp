#pragma once

#include <string>
#include <utility>
#include <vector>

#include "retlab/trace.hpp"

namespace retlab {

// Deterministic synthetic study corpus: 60 single-phase workloads whose
// per-line write-reuse gaps span sub-microsecond to 2ms, four write-mix
// variants per gap level, plus four two-pool mixes (a fast pool fused with a
// mid-retention pool) that pull the latency- and energy-optimal retention
// apart. Roughly 8M instructions per workload.
std::vector<std::pair<std::string, Workload>> make_study_corpus(uint64_t seed);

}  // namespace retlab
