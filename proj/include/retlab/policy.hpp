#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "retlab/cachesim.hpp"
#include "retlab/energymodel.hpp"
#include "retlab/learn.hpp"
#include "retlab/trace.hpp"

namespace retlab {

struct PolicyConfig {
  std::vector<RetentionProfile> retention_set = stt_retention_set();
  size_t base_index = kBaseRetentionIndex;  // 1ms
  Objective objective = Objective::latency;
  uint64_t profiling_window_instr = 1'000'000;
  uint64_t feedback_window_instr = 1'000'000;
  double feedback_epsilon = 0.01;  // revert if worse by more than this
  double migration_cost_ns = 2304.0;   // 4608 cycles at 2GHz
  double prediction_cost_ns = 4250.0;  // budgeted per decision (deterministic)
  double migration_transfer_energy_nj = 0.0;
  SimConfig sim;

  const RetentionProfile& base_profile() const { return retention_set[base_index]; }
  void validate() const;
};

struct PhaseDecision {
  std::string phase_id;
  double weight = 1.0;
  int predicted_index = -1;  // -1 when the phase ended before a decision
  int final_index = 0;       // unit the phase finished on
  int migrations = 0;
  bool reverted = false;
  uint64_t instructions = 0;
  double latency_ns = 0;   // executed segments, no overhead
  double energy_nj = 0;    // executed segments, no overhead
  double overhead_ns = 0;  // prediction + migration time
  double overhead_energy_nj = 0;
  double objective_value = 0;  // segments + overhead, in objective units
  SimStats stats;              // summed over the phase's segments
};

struct PolicyResult {
  std::string workload_id;
  std::string mode;  // static | exhaustive | lars | scart
  Objective objective = Objective::latency;
  std::vector<PhaseDecision> phases;
  int migrations = 0;
  int reverts = 0;
  double prediction_overhead_ns = 0;
  double overhead_ns = 0;  // migrations * migration_cost + prediction time
  // Phase-weighted totals, overheads included.
  double latency_total_ns = 0;
  double energy_total_nj = 0;
  double objective_total = 0;
};

// argmin with ties resolved toward the lower retention index.
size_t select_best(std::span<const double> values);

struct ExhaustiveEntry {
  double latency_ns = 0;
  double energy_nj = 0;
  double value(Objective o) const {
    return o == Objective::latency ? latency_ns : energy_nj;
  }
};

struct ExhaustivePhase {
  std::string phase_id;
  double weight = 1.0;
  uint64_t instructions = 0;
  std::vector<ExhaustiveEntry> per_profile;
  size_t best_latency = 0;
  size_t best_energy = 0;

  size_t best(Objective o) const {
    return o == Objective::latency ? best_latency : best_energy;
  }
};

struct ExhaustiveTable {
  std::string workload_id;
  std::vector<ExhaustivePhase> phases;

  // Phase-weighted objective of always running each phase on its best unit.
  double best_total(Objective o) const;
};

// Simulates every (phase, profile) pair; the table serves as training labels
// and as the oracle for policy comparisons. `jobs` > 1 fans the pairs out
// across worker threads.
ExhaustiveTable label_exhaustive(const Workload& workload,
                                 const PolicyConfig& config, unsigned jobs = 1);

// Whole workload on one profile, no migrations. Rejects an infinite-retention
// profile that carries STT-RAM energy constants.
PolicyResult run_static(const Workload& workload, const PolicyConfig& config,
                        const RetentionProfile& profile);

// One profiling window on the base unit, one prediction, optional migration,
// then a feedback window that reverts to base if the prediction degrades the
// objective per instruction by more than feedback_epsilon.
PolicyResult run_scart(const Workload& workload, const KnnModel& model,
                       const PolicyConfig& config);

// LARS-style sampling: one profiling window per unit in sequence, then the
// best sampled unit finishes the phase. Charged retention_set_size migrations
// per decision (zero when the set has a single unit).
PolicyResult run_lars_sampling(const Workload& workload,
                               const PolicyConfig& config);

// N single-core workloads on N cores with private L1 banks and one shared L2,
// advanced round-robin one event per core; per-core SCART decisions.
std::vector<PolicyResult> run_multiprogrammed(
    std::span<const Workload> workloads, const KnnModel& model,
    const PolicyConfig& config);

struct SavingsRow {
  std::string workload_id;
  double baseline = 0;
  double policy = 0;
  double savings_fraction = 0;  // (baseline - policy) / baseline
};

struct SavingsReport {
  Objective objective = Objective::latency;
  std::vector<SavingsRow> rows;
  double geomean_ratio = 1.0;          // geometric mean of policy/baseline
  double aggregate_savings_fraction = 0;  // 1 - geomean_ratio
};

SavingsReport savings_report(std::span<const PolicyResult> results,
                             std::span<const PolicyResult> baseline);

// Dataset row: profiling-window features plus the exhaustive objective table.
struct DatasetRow {
  std::string workload_id;
  std::string phase_id;
  double weight = 1.0;
  std::vector<double> features;
  std::vector<double> latency_by_profile;
  std::vector<double> energy_by_profile;
  int best_latency = 0;
  int best_energy = 0;
};

std::vector<DatasetRow> build_dataset(
    std::span<const std::pair<std::string, Workload>> corpus,
    const PolicyConfig& config, const FeatureCatalog& catalog,
    unsigned jobs = 1);

std::vector<LabeledSample> dataset_to_samples(std::span<const DatasetRow> rows,
                                              Objective objective);

}  // namespace retlab
