#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retlab/trace.hpp"
#include "retlab/util.hpp"

namespace retlab {

struct CacheGeometry {
  uint64_t capacity_bytes = 32 * 1024;
  uint32_t line_bytes = 64;
  uint32_t associativity = 4;

  uint32_t sets() const {
    return static_cast<uint32_t>(capacity_bytes /
                                 (uint64_t(line_bytes) * associativity));
  }
  void validate() const;
};

enum class DeviceKind : uint8_t { sram, sttram };

constexpr double kInfiniteRetention = std::numeric_limits<double>::infinity();

struct RetentionProfile {
  std::string name;
  DeviceKind device = DeviceKind::sttram;
  double retention_time_ns = kInfiniteRetention;  // inf => non-volatile
  double hit_latency_ns = 0;
  double write_latency_ns = 0;
  double read_energy_nj = 0;
  double write_energy_nj = 0;
  double leakage_mw = 0;

  bool volatile_cell() const {
    return retention_time_ns != kInfiniteRetention;
  }
  void validate() const;
};

// The Table II parameter set: SRAM profile plus the six relaxed-retention
// STT-RAM profiles (10us, 26.5us, 50us, 75us, 100us, 1ms).
RetentionProfile sram_profile();
std::vector<RetentionProfile> stt_retention_set();
constexpr size_t kBaseRetentionIndex = 5;  // 1ms

enum class AgingClock : uint8_t { simulated_time, nominal_time };

struct MonitorConfig {
  int n_states = 4;  // N-state FSM; expiry threshold at (N-1)/N * T
  AgingClock aging_clock = AgingClock::simulated_time;

  double threshold_ns(double retention_ns) const {
    return retention_ns * (n_states - 1) / n_states;
  }
  double quantum_ns(double retention_ns) const {
    return retention_ns / n_states;
  }
  int bits_per_block() const;  // ceil(log2 n_states)
  void validate() const;
};

struct TimingParams {
  double frequency_hz = 2e9;
  double base_cpi = 1.0;
  uint32_t hit_cycles = 1;
  uint32_t l2_hit_penalty_cycles = 20;
  uint32_t memory_penalty_cycles = 200;
  double l2_access_energy_nj = 0.05;  // placeholder constant, flagged in reports

  double ns_per_cycle() const { return 1e9 / frequency_hz; }
  void validate() const;
};

// Reuse-gap histogram: bucket i holds gaps in [2^i, 2^(i+1)) ns (gaps below
// 1ns land in bucket 0). p90 is the lower bound of the bucket where the
// cumulative count first reaches ceil(0.9 * n).
struct GapHistogram {
  std::array<uint64_t, 64> buckets{};
  uint64_t count = 0;
  double sum_ns = 0;

  void record(double gap_ns);
  double mean_ns() const { return count ? sum_ns / count : 0.0; }
  double p90_ns() const;

  GapHistogram& operator+=(const GapHistogram& o);
  GapHistogram& operator-=(const GapHistogram& o);
  bool operator==(const GapHistogram&) const = default;
};

struct SimStats {
  uint64_t instructions = 0;
  uint64_t l1_reads = 0;
  uint64_t l1_writes = 0;
  uint64_t l1_read_misses = 0;
  uint64_t l1_write_misses = 0;
  uint64_t l1_fills = 0;        // lines installed in the L1 array
  uint64_t l1_evictions = 0;    // valid lines replaced on a miss (not expiry)
  uint64_t l1_writebacks = 0;   // dirty replacement writebacks to L2
  uint64_t expiry_evictions = 0;
  uint64_t expiry_writebacks = 0;
  uint64_t l2_accesses = 0;  // demand fills + all writebacks (incl. expiry)
  uint64_t l2_misses = 0;    // demand misses only
  uint64_t l2_writebacks = 0;
  uint64_t unique_lines = 0;
  uint64_t single_access_lines = 0;
  uint64_t stall_cycles = 0;
  uint64_t hit_runs = 0;    // maximal runs of consecutive L1 hits
  uint64_t write_runs = 0;  // maximal runs of consecutive write events
  GapHistogram write_gaps;  // per-line write-to-write
  GapHistogram read_gaps;   // per-line read-to-read
  uint64_t cycles = 0;
  double sim_time_ns = 0;

  uint64_t l1_accesses() const { return l1_reads + l1_writes; }
  uint64_t l1_misses() const { return l1_read_misses + l1_write_misses; }
  uint64_t l1_hits() const { return l1_accesses() - l1_misses(); }

  SimStats& operator+=(const SimStats& o);
  // Counter-wise difference of a later snapshot against an earlier one.
  SimStats diff_since(const SimStats& earlier) const;
  bool operator==(const SimStats&) const = default;
};

struct PhaseStats {
  std::string phase_id;
  double weight = 1.0;
  SimStats stats;
};

struct SimResult {
  SimStats total;
  std::vector<PhaseStats> phases;
};

struct AccessOutcome {
  bool hit = false;
  bool expiry_triggered = false;   // lazy check evicted expired blocks
  bool writeback_issued = false;   // any dirty writeback during this access
  uint32_t stall_cycles = 0;       // cycles beyond the base CPI charge
};

// Sink for traffic leaving an L1 unit.
class LowerLevel {
 public:
  virtual ~LowerLevel() = default;
  virtual void writeback(uint64_t line_addr, bool expiry) = 0;
  virtual void demand_fill(uint64_t line_addr) = 0;
};

class NullLowerLevel : public LowerLevel {
 public:
  void writeback(uint64_t, bool) override {}
  void demand_fill(uint64_t) override {}
};

// One set-associative LRU cache unit with write-allocate/writeback policy and
// monitor-counter expiry. Any write (store hit or fill) resets the block's
// retention clock; reads do not.
class L1Cache {
 public:
  struct Result {
    bool hit = false;
    uint32_t set_expiries = 0;       // expired blocks evicted before lookup
    uint32_t expiry_writebacks = 0;  // of those, dirty ones written back
    bool fill = false;               // line installed (miss path)
    bool evicted_valid = false;      // replacement evicted a live block
    bool replacement_writeback = false;
  };

  L1Cache(const CacheGeometry& geom, const MonitorConfig& monitor,
          double retention_ns);

  Result access(AccessKind kind, uint64_t addr, double now_ns, LowerLevel& lower);
  // Invalidates every block whose age reached the threshold; returns the
  // number of evictions (dirty ones are written back through `lower`).
  uint64_t sweep_expired(double now_ns, LowerLevel& lower,
                         uint64_t* writebacks = nullptr);

  bool finite_retention() const { return threshold_ns_ < kInfiniteRetention; }
  double threshold_ns() const { return threshold_ns_; }
  double quantum_ns() const { return quantum_ns_; }

 private:
  struct Block {
    uint64_t tag = 0;
    bool valid = false;
    bool dirty = false;
    uint64_t lru_rank = 0;
    double last_write_ns = 0;
  };

  std::span<Block> set_of(uint64_t addr, uint64_t& tag_out);

  CacheGeometry geom_;
  uint32_t sets_;
  uint32_t line_shift_;
  double threshold_ns_;
  double quantum_ns_;
  uint64_t lru_tick_ = 0;
  std::vector<Block> blocks_;
};

// Plain LRU set-associative cache used as the (shared) L2. Writebacks from L1
// allocate on miss; demand fills allocate and report hit/miss.
class L2Cache {
 public:
  struct Result {
    bool hit = false;
    bool dirty_evicted = false;  // L2 victim written back to memory
  };

  explicit L2Cache(const CacheGeometry& geom);

  Result access(uint64_t addr, bool is_writeback);
  void reset();

 private:
  struct Block {
    uint64_t tag = 0;
    bool valid = false;
    bool dirty = false;
    uint64_t lru_rank = 0;
  };

  CacheGeometry geom_;
  uint32_t sets_;
  uint32_t line_shift_;
  uint64_t lru_tick_ = 0;
  std::vector<Block> blocks_;
};

struct SimConfig {
  CacheGeometry l1{32 * 1024, 64, 4};
  CacheGeometry l2{1024 * 1024, 64, 16};
  MonitorConfig monitor{};
  TimingParams timing{};
  bool collect_line_stats = true;

  void validate() const;
};

// Drives one core's event stream through an L1 unit bank and a (possibly
// shared) L2, advancing the cycle clock with the same affine model the energy
// module uses, so compute_latency(stats) == stats.sim_time_ns exactly.
class CoreSim {
 public:
  CoreSim(const SimConfig& cfg, std::span<const RetentionProfile> units,
          size_t active_unit, L2Cache& l2);
  ~CoreSim();

  AccessOutcome step(const AccessEvent& event);
  // Switches the active unit; the previous unit keeps its contents and keeps
  // aging (expired blocks are reaped lazily if the unit is revisited, and by
  // finish() at the end of the phase).
  void switch_unit(size_t unit_idx);
  // Final expiry sweep over every instantiated unit at the current time.
  void finish();

  SimStats snapshot() const;
  double now_ns() const;           // aging-clock time
  double elapsed_ns() const;       // wall (cycle) time
  uint64_t instructions() const { return instructions_; }
  size_t active_unit() const { return active_; }
  const RetentionProfile& active_profile() const { return units_[active_]; }

 private:
  struct LineInfo {
    uint32_t accesses = 0;
    double last_write_ns = -1;
    double last_read_ns = -1;
  };

  class L2Adapter;

  L1Cache& unit(size_t idx);
  void run_sweeps_until(double now_ns);
  void record_line(const AccessEvent& e, double now_ns);

  SimConfig cfg_;
  std::vector<RetentionProfile> units_;
  std::vector<std::unique_ptr<L1Cache>> banks_;
  size_t active_;
  L2Cache* l2_;
  std::unique_ptr<L2Adapter> adapter_;
  SimStats stats_;
  LineMap<LineInfo> lines_;
  uint64_t unique_count_ = 0;
  uint64_t single_count_ = 0;
  uint64_t instructions_ = 0;
  uint32_t write_stall_cycles_ = 0;  // per-store stall for the active unit
  double next_sweep_ns_ = 0;
  bool last_was_hit_ = false;
  bool last_was_write_ = false;
  bool have_last_ = false;
};

// Simulates a single-core workload phase-by-phase (cold caches per phase).
// If `outcomes` is given it receives one entry per event across all phases.
SimResult simulate(const Workload& workload, const SimConfig& cfg,
                   const RetentionProfile& profile,
                   std::vector<AccessOutcome>* outcomes = nullptr);

}  // namespace retlab
