#pragma once

#include "retlab/cachesim.hpp"

namespace retlab {

struct EnergyReport {
  double dynamic_read_nj = 0;
  double dynamic_write_nj = 0;
  double leakage_nj = 0;
  double l2_charge_nj = 0;
  double total_nj = 0;
  double latency_ns = 0;
};

// Extra cycles a store spends beyond the hit cycle on this profile.
uint32_t write_stall_cycles(const RetentionProfile& profile,
                            const TimingParams& timing);

// Additive in-order timing:
//   cycles = instructions*base_cpi + l1_misses*l2_hit_penalty
//          + l2_misses*memory_penalty + l1_writes*write_stall
// This is the same formula CoreSim uses to advance its clock, so for a
// single-profile run compute_latency(stats) == stats.sim_time_ns.
double compute_latency_ns(const SimStats& stats, const RetentionProfile& profile,
                          const TimingParams& timing);

EnergyReport compute_energy(const SimStats& stats,
                            const RetentionProfile& profile,
                            const TimingParams& timing);

}  // namespace retlab
