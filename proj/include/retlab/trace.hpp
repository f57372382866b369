#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace retlab {

enum class AccessKind : uint8_t { read, write };

struct AccessEvent {
  uint64_t instr_gap = 0;  // instructions retired since the previous memory event
  AccessKind kind = AccessKind::read;
  uint64_t address = 0;  // byte address
  uint32_t core = 0;

  bool operator==(const AccessEvent&) const = default;
};

struct PhaseTrace {
  std::string phase_id;
  double weight = 1.0;  // normalized over the workload
  std::vector<AccessEvent> events;

  // Every memory event is itself one instruction, preceded by instr_gap
  // non-memory instructions.
  uint64_t instruction_count() const;

  bool operator==(const PhaseTrace&) const = default;
};

struct Workload {
  std::vector<PhaseTrace> phases;

  uint64_t instruction_count() const;
  uint64_t event_count() const;
  uint32_t core_count() const;  // max core index + 1 (1 for empty)
  bool single_core() const { return core_count() <= 1; }

  bool operator==(const Workload&) const = default;
};

struct SyntheticParams {
  uint64_t working_set_lines = 128;   // cap on the hot line pool
  double write_fraction = 0.5;        // [0,1]
  double reuse_gap_mean_ns = 10000;   // target mean write-to-write gap per hot line
  double streaming_fraction = 0.0;    // [0,1] of events to never-reused lines
  uint64_t event_count = 100000;
  uint64_t instr_per_event_mean = 10;
  uint64_t seed = 1;
};

// Trace text format (UTF-8, LF):
//   #phase <id> <weight>     starts a phase
//   #core <n>                sets the core for subsequent events (default 0)
//   <instr_gap> <R|W> 0x<hex_addr>
//   # anything else          comment
Workload parse_trace(std::istream& in, std::vector<std::string>* warnings = nullptr);
Workload parse_trace_file(const std::string& path, std::vector<std::string>* warnings = nullptr);
void serialize_trace(const Workload& w, std::ostream& out);
std::string serialize_trace(const Workload& w);
void write_trace_file(const Workload& w, const std::string& path);

Workload generate_synthetic(const SyntheticParams& params);

enum class InterleavePolicy { round_robin };

// Merges single-core, single-phase workloads into one multi-core workload,
// one event per core per turn. Workload i's events carry core index i.
Workload interleave(const std::vector<Workload>& workloads,
                    InterleavePolicy policy = InterleavePolicy::round_robin);

// Merges two single-core single-phase workloads into one single-core phase by
// absolute instruction position. Used to compose mixed-reuse workloads; the
// second trace's addresses are offset so the line pools stay disjoint.
Workload fuse(const Workload& a, const Workload& b, uint64_t b_address_offset);

}  // namespace retlab
