#include "retlab/cachesim.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>

#include "retlab/energymodel.hpp"
#include "retlab/error.hpp"

namespace retlab {

void CacheGeometry::validate() const {
  if (line_bytes == 0 || (line_bytes & (line_bytes - 1)) != 0)
    fail(ErrorKind::config, "line_bytes must be a power of two");
  if (associativity < 1) fail(ErrorKind::config, "associativity must be >= 1");
  if (capacity_bytes == 0 ||
      capacity_bytes % (uint64_t(line_bytes) * associativity) != 0)
    fail(ErrorKind::config,
         "capacity must be divisible by line_bytes * associativity");
}

void RetentionProfile::validate() const {
  if (!(retention_time_ns > 0))
    fail(ErrorKind::config, "profile " + name + ": retention must be > 0");
  if (!(hit_latency_ns > 0) || !(write_latency_ns > 0))
    fail(ErrorKind::config, "profile " + name + ": latencies must be > 0");
  if (!(read_energy_nj > 0) || !(write_energy_nj > 0) || !(leakage_mw > 0))
    fail(ErrorKind::config, "profile " + name + ": energies must be > 0");
  if (device == DeviceKind::sram && volatile_cell())
    fail(ErrorKind::config,
         "profile " + name + ": SRAM must have infinite retention");
}

RetentionProfile sram_profile() {
  return {"sram", DeviceKind::sram, kInfiniteRetention,
          0.486,  0.350,            0.0076,
          0.0066, 34.265};
}

std::vector<RetentionProfile> stt_retention_set() {
  return {
      {"stt_10us", DeviceKind::sttram, 10000.0, 0.464, 0.601, 0.003, 0.026, 4.659},
      {"stt_26.5us", DeviceKind::sttram, 26500.0, 0.454, 0.769, 0.003, 0.030, 4.659},
      {"stt_50us", DeviceKind::sttram, 50000.0, 0.448, 0.894, 0.003, 0.033, 4.659},
      {"stt_75us", DeviceKind::sttram, 75000.0, 0.445, 0.981, 0.003, 0.035, 4.659},
      {"stt_100us", DeviceKind::sttram, 100000.0, 0.443, 1.045, 0.003, 0.036, 4.659},
      {"stt_1ms", DeviceKind::sttram, 1000000.0, 0.438, 1.647, 0.003, 0.051, 4.659},
  };
}

int MonitorConfig::bits_per_block() const {
  int bits = 0;
  while ((1 << bits) < n_states) ++bits;
  return bits;
}

void MonitorConfig::validate() const {
  if (n_states < 2) fail(ErrorKind::config, "monitor n_states must be >= 2");
}

void TimingParams::validate() const {
  if (!(frequency_hz > 0)) fail(ErrorKind::config, "frequency must be > 0");
  if (!(base_cpi > 0)) fail(ErrorKind::config, "base_cpi must be > 0");
  if (hit_cycles < 1) fail(ErrorKind::config, "hit_cycles must be >= 1");
}

void SimConfig::validate() const {
  l1.validate();
  l2.validate();
  monitor.validate();
  timing.validate();
}

void GapHistogram::record(double gap_ns) {
  int bucket = 0;
  if (gap_ns >= 1.0) {
    int e = 0;
    std::frexp(gap_ns, &e);  // gap in [2^(e-1), 2^e)
    bucket = std::min(63, e - 1);
  }
  ++buckets[bucket];
  ++count;
  sum_ns += gap_ns;
}

double GapHistogram::p90_ns() const {
  if (count == 0) return 0.0;
  uint64_t rank = (9 * count + 9) / 10;  // ceil(0.9 * count)
  uint64_t cum = 0;
  for (int i = 0; i < 64; ++i) {
    cum += buckets[i];
    if (cum >= rank) return std::ldexp(1.0, i);
  }
  return std::ldexp(1.0, 63);
}

GapHistogram& GapHistogram::operator+=(const GapHistogram& o) {
  for (int i = 0; i < 64; ++i) buckets[i] += o.buckets[i];
  count += o.count;
  sum_ns += o.sum_ns;
  return *this;
}

GapHistogram& GapHistogram::operator-=(const GapHistogram& o) {
  for (int i = 0; i < 64; ++i) buckets[i] -= o.buckets[i];
  count -= o.count;
  sum_ns -= o.sum_ns;
  return *this;
}

SimStats& SimStats::operator+=(const SimStats& o) {
  instructions += o.instructions;
  l1_reads += o.l1_reads;
  l1_writes += o.l1_writes;
  l1_read_misses += o.l1_read_misses;
  l1_write_misses += o.l1_write_misses;
  l1_fills += o.l1_fills;
  l1_evictions += o.l1_evictions;
  l1_writebacks += o.l1_writebacks;
  expiry_evictions += o.expiry_evictions;
  expiry_writebacks += o.expiry_writebacks;
  l2_accesses += o.l2_accesses;
  l2_misses += o.l2_misses;
  l2_writebacks += o.l2_writebacks;
  unique_lines += o.unique_lines;
  single_access_lines += o.single_access_lines;
  stall_cycles += o.stall_cycles;
  hit_runs += o.hit_runs;
  write_runs += o.write_runs;
  write_gaps += o.write_gaps;
  read_gaps += o.read_gaps;
  cycles += o.cycles;
  sim_time_ns += o.sim_time_ns;
  return *this;
}

SimStats SimStats::diff_since(const SimStats& earlier) const {
  SimStats d = *this;
  d.instructions -= earlier.instructions;
  d.l1_reads -= earlier.l1_reads;
  d.l1_writes -= earlier.l1_writes;
  d.l1_read_misses -= earlier.l1_read_misses;
  d.l1_write_misses -= earlier.l1_write_misses;
  d.l1_fills -= earlier.l1_fills;
  d.l1_evictions -= earlier.l1_evictions;
  d.l1_writebacks -= earlier.l1_writebacks;
  d.expiry_evictions -= earlier.expiry_evictions;
  d.expiry_writebacks -= earlier.expiry_writebacks;
  d.l2_accesses -= earlier.l2_accesses;
  d.l2_misses -= earlier.l2_misses;
  d.l2_writebacks -= earlier.l2_writebacks;
  d.unique_lines -= earlier.unique_lines;
  d.single_access_lines = d.single_access_lines >= earlier.single_access_lines
                              ? d.single_access_lines - earlier.single_access_lines
                              : 0;
  d.stall_cycles -= earlier.stall_cycles;
  d.hit_runs -= earlier.hit_runs;
  d.write_runs -= earlier.write_runs;
  d.write_gaps -= earlier.write_gaps;
  d.read_gaps -= earlier.read_gaps;
  d.cycles -= earlier.cycles;
  d.sim_time_ns -= earlier.sim_time_ns;
  return d;
}

// ---------------------------------------------------------------------------
// L1Cache

L1Cache::L1Cache(const CacheGeometry& geom, const MonitorConfig& monitor,
                 double retention_ns)
    : geom_(geom),
      sets_(geom.sets()),
      line_shift_(static_cast<uint32_t>(std::countr_zero(uint64_t(geom.line_bytes)))),
      threshold_ns_(retention_ns == kInfiniteRetention
                        ? kInfiniteRetention
                        : monitor.threshold_ns(retention_ns)),
      quantum_ns_(retention_ns == kInfiniteRetention
                      ? kInfiniteRetention
                      : monitor.quantum_ns(retention_ns)),
      blocks_(size_t(sets_) * geom.associativity) {}

std::span<L1Cache::Block> L1Cache::set_of(uint64_t addr, uint64_t& tag_out) {
  uint64_t line = addr >> line_shift_;
  uint32_t set = static_cast<uint32_t>(line % sets_);
  tag_out = line / sets_;
  return {blocks_.data() + size_t(set) * geom_.associativity,
          geom_.associativity};
}

L1Cache::Result L1Cache::access(AccessKind kind, uint64_t addr, double now_ns,
                                LowerLevel& lower) {
  Result r;
  uint64_t tag = 0;
  auto set = set_of(addr, tag);
  uint64_t line = addr >> line_shift_;
  uint32_t set_idx = static_cast<uint32_t>(line % sets_);

  // Expiry check precedes the lookup: anything at or past the threshold is
  // gone before it can serve a hit.
  if (finite_retention()) {
    for (auto& b : set) {
      if (!b.valid) continue;
      if (now_ns - b.last_write_ns >= threshold_ns_) {
        if (b.dirty) {
          lower.writeback((b.tag * sets_ + set_idx) << line_shift_, true);
          ++r.expiry_writebacks;
        }
        b.valid = false;
        ++r.set_expiries;
      }
    }
  }

  Block* hit_block = nullptr;
  for (auto& b : set) {
    if (b.valid && b.tag == tag) {
      hit_block = &b;
      break;
    }
  }

  if (hit_block) {
    assert(!finite_retention() ||
           now_ns - hit_block->last_write_ns < threshold_ns_);
    r.hit = true;
    hit_block->lru_rank = ++lru_tick_;
    if (kind == AccessKind::write) {
      hit_block->dirty = true;
      hit_block->last_write_ns = now_ns;  // store refreshes the cell
    }
    return r;
  }

  // Miss: write-allocate on both reads and writes.
  Block* victim = nullptr;
  for (auto& b : set) {
    if (!b.valid) {
      victim = &b;
      break;
    }
  }
  if (!victim) {
    for (auto& b : set)
      if (!victim || b.lru_rank < victim->lru_rank) victim = &b;
    r.evicted_valid = true;
    if (victim->dirty) {
      lower.writeback((victim->tag * sets_ + set_idx) << line_shift_, false);
      r.replacement_writeback = true;
    }
  }
  lower.demand_fill(line << line_shift_);
  victim->tag = tag;
  victim->valid = true;
  victim->dirty = kind == AccessKind::write;
  victim->lru_rank = ++lru_tick_;
  victim->last_write_ns = now_ns;  // the fill writes the array
  r.fill = true;
  return r;
}

uint64_t L1Cache::sweep_expired(double now_ns, LowerLevel& lower,
                                uint64_t* writebacks) {
  uint64_t evictions = 0;
  if (!finite_retention()) return 0;
  for (uint32_t s = 0; s < sets_; ++s) {
    auto set = std::span<Block>(blocks_.data() + size_t(s) * geom_.associativity,
                                geom_.associativity);
    for (auto& b : set) {
      if (!b.valid) continue;
      if (now_ns - b.last_write_ns >= threshold_ns_) {
        if (b.dirty) {
          lower.writeback((b.tag * sets_ + s) << line_shift_, true);
          if (writebacks) ++*writebacks;
        }
        b.valid = false;
        ++evictions;
      }
    }
  }
  return evictions;
}

// ---------------------------------------------------------------------------
// L2Cache

L2Cache::L2Cache(const CacheGeometry& geom)
    : geom_(geom),
      sets_(geom.sets()),
      line_shift_(static_cast<uint32_t>(std::countr_zero(uint64_t(geom.line_bytes)))),
      blocks_(size_t(sets_) * geom.associativity) {}

L2Cache::Result L2Cache::access(uint64_t addr, bool is_writeback) {
  Result r;
  uint64_t line = addr >> line_shift_;
  uint32_t set_idx = static_cast<uint32_t>(line % sets_);
  uint64_t tag = line / sets_;
  auto* set = blocks_.data() + size_t(set_idx) * geom_.associativity;

  for (uint32_t i = 0; i < geom_.associativity; ++i) {
    auto& b = set[i];
    if (b.valid && b.tag == tag) {
      r.hit = true;
      b.lru_rank = ++lru_tick_;
      if (is_writeback) b.dirty = true;
      return r;
    }
  }

  Block* victim = nullptr;
  for (uint32_t i = 0; i < geom_.associativity; ++i) {
    if (!set[i].valid) {
      victim = &set[i];
      break;
    }
  }
  if (!victim) {
    for (uint32_t i = 0; i < geom_.associativity; ++i)
      if (!victim || set[i].lru_rank < victim->lru_rank) victim = &set[i];
    if (victim->dirty) r.dirty_evicted = true;
  }
  victim->tag = tag;
  victim->valid = true;
  victim->dirty = is_writeback;
  victim->lru_rank = ++lru_tick_;
  return r;
}

void L2Cache::reset() {
  std::fill(blocks_.begin(), blocks_.end(), Block{});
  lru_tick_ = 0;
}

// ---------------------------------------------------------------------------
// CoreSim

class CoreSim::L2Adapter : public LowerLevel {
 public:
  L2Adapter(L2Cache* l2, SimStats& stats) : l2_(l2), stats_(stats) {}

  void writeback(uint64_t line_addr, bool expiry) override {
    ++stats_.l2_accesses;
    if (expiry) ++stats_.expiry_writebacks;
    auto r = l2_->access(line_addr, true);
    if (r.dirty_evicted) ++stats_.l2_writebacks;
  }

  void demand_fill(uint64_t line_addr) override {
    ++stats_.l2_accesses;
    auto r = l2_->access(line_addr, false);
    if (!r.hit) {
      ++stats_.l2_misses;
      ++demand_misses;
    }
    if (r.dirty_evicted) ++stats_.l2_writebacks;
  }

  uint32_t demand_misses = 0;  // reset per event by CoreSim

 private:
  L2Cache* l2_;
  SimStats& stats_;
};

CoreSim::CoreSim(const SimConfig& cfg, std::span<const RetentionProfile> units,
                 size_t active_unit, L2Cache& l2)
    : cfg_(cfg),
      units_(units.begin(), units.end()),
      banks_(units.size()),
      active_(active_unit),
      l2_(&l2) {
  cfg_.validate();
  if (units_.empty() || active_ >= units_.size())
    fail(ErrorKind::config, "invalid active unit index");
  unit(active_);
  adapter_ = std::make_unique<L2Adapter>(l2_, stats_);
  write_stall_cycles_ = write_stall_cycles(units_[active_], cfg_.timing);
  const L1Cache& u = *banks_[active_];
  next_sweep_ns_ = u.finite_retention() ? u.quantum_ns() : kInfiniteRetention;
}

CoreSim::~CoreSim() = default;

L1Cache& CoreSim::unit(size_t idx) {
  if (!banks_[idx])
    banks_[idx] = std::make_unique<L1Cache>(cfg_.l1, cfg_.monitor,
                                            units_[idx].retention_time_ns);
  return *banks_[idx];
}

double CoreSim::now_ns() const {
  double cycles = static_cast<double>(instructions_) * cfg_.timing.base_cpi;
  if (cfg_.monitor.aging_clock == AgingClock::simulated_time)
    cycles += static_cast<double>(stats_.stall_cycles);
  return cycles * cfg_.timing.ns_per_cycle();
}

double CoreSim::elapsed_ns() const {
  return (static_cast<double>(instructions_) * cfg_.timing.base_cpi +
          static_cast<double>(stats_.stall_cycles)) *
         cfg_.timing.ns_per_cycle();
}

void CoreSim::run_sweeps_until(double now) {
  L1Cache& u = *banks_[active_];
  if (!u.finite_retention()) return;
  while (next_sweep_ns_ <= now) {
    stats_.expiry_evictions += u.sweep_expired(next_sweep_ns_, *adapter_);
    next_sweep_ns_ += u.quantum_ns();
  }
}

void CoreSim::record_line(const AccessEvent& e, double now) {
  uint64_t line = e.address >> std::countr_zero(uint64_t(cfg_.l1.line_bytes));
  LineInfo& info = lines_[line];
  if (info.accesses == 0) {
    ++unique_count_;
    ++single_count_;
  } else if (info.accesses == 1) {
    --single_count_;
  }
  ++info.accesses;
  if (e.kind == AccessKind::write) {
    if (info.last_write_ns >= 0)
      stats_.write_gaps.record(now - info.last_write_ns);
    info.last_write_ns = now;
  } else {
    if (info.last_read_ns >= 0)
      stats_.read_gaps.record(now - info.last_read_ns);
    info.last_read_ns = now;
  }
}

AccessOutcome CoreSim::step(const AccessEvent& event) {
  instructions_ += event.instr_gap + 1;
  double now = now_ns();

  run_sweeps_until(now);

  adapter_->demand_misses = 0;
  L1Cache::Result r = banks_[active_]->access(event.kind, event.address, now,
                                              *adapter_);

  AccessOutcome out;
  out.hit = r.hit;
  out.expiry_triggered = r.set_expiries > 0;
  out.writeback_issued = r.expiry_writebacks > 0 || r.replacement_writeback;
  stats_.expiry_evictions += r.set_expiries;
  // expiry/replacement writeback and l2 counters were charged by the adapter
  if (r.replacement_writeback) ++stats_.l1_writebacks;
  if (r.evicted_valid) ++stats_.l1_evictions;
  if (r.fill) ++stats_.l1_fills;

  uint32_t stall = 0;
  if (event.kind == AccessKind::read) {
    ++stats_.l1_reads;
    if (!r.hit) {
      ++stats_.l1_read_misses;
      stall += cfg_.timing.l2_hit_penalty_cycles;
    }
  } else {
    ++stats_.l1_writes;
    stall += write_stall_cycles_;
    if (!r.hit) {
      ++stats_.l1_write_misses;
      stall += cfg_.timing.l2_hit_penalty_cycles;
    }
  }
  stall += adapter_->demand_misses * cfg_.timing.memory_penalty_cycles;
  stats_.stall_cycles += stall;
  out.stall_cycles = stall;

  if (r.hit && (!have_last_ || !last_was_hit_)) ++stats_.hit_runs;
  bool is_write = event.kind == AccessKind::write;
  if (is_write && (!have_last_ || !last_was_write_)) ++stats_.write_runs;
  last_was_hit_ = r.hit;
  last_was_write_ = is_write;
  have_last_ = true;

  if (cfg_.collect_line_stats) record_line(event, now);
  return out;
}

void CoreSim::switch_unit(size_t unit_idx) {
  if (unit_idx >= units_.size())
    fail(ErrorKind::config, "unit index out of range");
  if (unit_idx == active_) return;
  active_ = unit_idx;
  L1Cache& u = unit(active_);
  write_stall_cycles_ = write_stall_cycles(units_[active_], cfg_.timing);
  double now = now_ns();
  if (u.finite_retention()) {
    // Reap anything that expired while the unit was inactive, then resume the
    // quantum sweep schedule from the next boundary.
    stats_.expiry_evictions += u.sweep_expired(now, *adapter_);
    double q = u.quantum_ns();
    next_sweep_ns_ = (std::floor(now / q) + 1.0) * q;
  } else {
    next_sweep_ns_ = kInfiniteRetention;
  }
}

void CoreSim::finish() {
  double now = now_ns();
  run_sweeps_until(now);
  for (auto& bank : banks_) {
    if (!bank) continue;
    stats_.expiry_evictions += bank->sweep_expired(now, *adapter_);
  }
}

SimStats CoreSim::snapshot() const {
  SimStats s = stats_;
  s.instructions = instructions_;
  s.unique_lines = unique_count_;
  s.single_access_lines = single_count_;
  double base_cycles = static_cast<double>(instructions_) * cfg_.timing.base_cpi;
  s.cycles = static_cast<uint64_t>(std::llround(base_cycles)) + s.stall_cycles;
  s.sim_time_ns =
      (base_cycles + static_cast<double>(s.stall_cycles)) * cfg_.timing.ns_per_cycle();
  return s;
}

SimResult simulate(const Workload& workload, const SimConfig& cfg,
                   const RetentionProfile& profile,
                   std::vector<AccessOutcome>* outcomes) {
  if (!workload.single_core())
    fail(ErrorKind::schema, "simulate requires a single-core workload");
  profile.validate();
  SimResult result;
  std::array<RetentionProfile, 1> units{profile};
  for (const auto& phase : workload.phases) {
    L2Cache l2(cfg.l2);
    CoreSim core(cfg, units, 0, l2);
    for (const auto& e : phase.events) {
      AccessOutcome o = core.step(e);
      if (outcomes) outcomes->push_back(o);
    }
    core.finish();
    SimStats s = core.snapshot();
    result.phases.push_back({phase.phase_id, phase.weight, s});
    result.total += s;
  }
  return result;
}

}  // namespace retlab
