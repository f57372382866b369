#pragma once

#include <string>
#include <vector>

#include "retlab/cachesim.hpp"
#include "retlab/learn.hpp"
#include "retlab/policy.hpp"

namespace retlab {

// Whole-experiment configuration, INI round-trippable: parse(dump(c)) == c and
// dump(parse(dump(c))) is byte-identical. Unknown sections or keys are
// rejected. Durations accept ns/us/ms suffixes (canonical dump: ns), energies
// nj/uj (canonical: nj).
struct ExperimentConfig {
  CacheGeometry l1{32 * 1024, 64, 4};
  CacheGeometry l2{1024 * 1024, 64, 16};
  TimingParams timing{};
  MonitorConfig monitor{};
  int k = 3;
  int folds = 5;
  Objective objective = Objective::latency;
  std::string base_profile = "stt_1ms";
  uint64_t profiling_window = 1'000'000;
  uint64_t feedback_window = 1'000'000;
  double feedback_epsilon = 0.01;
  double migration_cost_ns = 2304.0;
  double prediction_cost_ns = 4250.0;
  double migration_transfer_energy_nj = 0.0;
  uint64_t seed = 1;
  std::string manifest;  // optional workload manifest path
  std::vector<RetentionProfile> profiles;  // table order: sram first, then STT

  // Assembles the policy view: retention set = the STT-RAM profiles in table
  // order, base resolved by name.
  PolicyConfig policy() const;
  SimConfig sim() const;
  const RetentionProfile& profile_by_name(const std::string& name) const;
  void validate() const;
};

ExperimentConfig default_experiment_config();

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);
std::string dump_config(const ExperimentConfig& config);

}  // namespace retlab
