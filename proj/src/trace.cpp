#include "retlab/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "retlab/error.hpp"
#include "retlab/rng.hpp"
#include "retlab/util.hpp"

namespace retlab {

uint64_t PhaseTrace::instruction_count() const {
  uint64_t n = 0;
  for (const auto& e : events) n += e.instr_gap + 1;
  return n;
}

uint64_t Workload::instruction_count() const {
  uint64_t n = 0;
  for (const auto& p : phases) n += p.instruction_count();
  return n;
}

uint64_t Workload::event_count() const {
  uint64_t n = 0;
  for (const auto& p : phases) n += p.events.size();
  return n;
}

uint32_t Workload::core_count() const {
  uint32_t max_core = 0;
  for (const auto& p : phases)
    for (const auto& e : p.events) max_core = std::max(max_core, e.core);
  return max_core + 1;
}

namespace {

uint64_t parse_u64(std::string_view tok, int line_no, const char* what) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": invalid " +
                               what + " '" + std::string(tok) + "'");
  return v;
}

uint64_t parse_hex_addr(std::string_view tok, int line_no) {
  if (tok.size() < 3 || tok[0] != '0' || (tok[1] != 'x' && tok[1] != 'X'))
    fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                               ": address must be 0x-prefixed hex, got '" +
                               std::string(tok) + "'");
  uint64_t v = 0;
  auto body = tok.substr(2);
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), v, 16);
  if (ec != std::errc{} || p != body.data() + body.size())
    fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                               ": invalid hex address '" + std::string(tok) + "'");
  return v;
}

double parse_weight(std::string_view tok, int line_no) {
  char* end = nullptr;
  std::string s(tok);
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                               ": invalid phase weight '" + s + "'");
  return v;
}

}  // namespace

Workload parse_trace(std::istream& in, std::vector<std::string>* warnings) {
  Workload w;
  PhaseTrace* cur = nullptr;
  uint32_t cur_core = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv[0] == '#') {
      auto toks = split_ws(sv);
      if (toks[0] == "#phase") {
        if (toks.size() != 3)
          fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                     ": expected '#phase <id> <weight>'");
        PhaseTrace p;
        p.phase_id = std::string(toks[1]);
        p.weight = parse_weight(toks[2], line_no);
        if (p.weight < 0)
          fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                     ": phase weight must be nonnegative");
        w.phases.push_back(std::move(p));
        cur = &w.phases.back();
        cur_core = 0;
      } else if (toks[0] == "#core") {
        if (toks.size() != 2)
          fail(ErrorKind::parse,
               "line " + std::to_string(line_no) + ": expected '#core <n>'");
        cur_core = static_cast<uint32_t>(parse_u64(toks[1], line_no, "core index"));
      }
      // any other #-line is a comment
      continue;
    }
    auto toks = split_ws(sv);
    if (toks.size() != 3)
      fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                 ": expected '<instr_gap> <R|W> 0x<addr>'");
    if (!cur)
      fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                 ": event before any '#phase' header");
    AccessEvent e;
    e.instr_gap = parse_u64(toks[0], line_no, "instruction gap");
    if (toks[1] == "R")
      e.kind = AccessKind::read;
    else if (toks[1] == "W")
      e.kind = AccessKind::write;
    else
      fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                 ": invalid access kind '" + std::string(toks[1]) +
                                 "' (expected R or W)");
    e.address = parse_hex_addr(toks[2], line_no);
    e.core = cur_core;
    cur->events.push_back(e);
  }
  if (w.phases.empty()) fail(ErrorKind::parse, "no phases in trace input");

  double sum = 0;
  for (const auto& p : w.phases) sum += p.weight;
  if (sum <= 0)
    fail(ErrorKind::parse, "phase weights sum to zero; cannot normalize");
  if (std::abs(sum - 1.0) > 1e-9) {
    if (warnings)
      warnings->push_back("phase weights sum to " + format_double(sum) +
                          "; normalizing to 1");
    for (auto& p : w.phases) p.weight /= sum;
  }
  return w;
}

Workload parse_trace_file(const std::string& path,
                          std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open trace file: " + path);
  return parse_trace(in, warnings);
}

void serialize_trace(const Workload& w, std::ostream& out) {
  for (const auto& p : w.phases) {
    out << "#phase " << p.phase_id << ' ' << format_double(p.weight) << '\n';
    uint32_t cur_core = 0;
    char buf[64];
    for (const auto& e : p.events) {
      if (e.core != cur_core) {
        out << "#core " << e.core << '\n';
        cur_core = e.core;
      }
      std::snprintf(buf, sizeof(buf), "%llu %c 0x%llx\n",
                    static_cast<unsigned long long>(e.instr_gap),
                    e.kind == AccessKind::read ? 'R' : 'W',
                    static_cast<unsigned long long>(e.address));
      out << buf;
    }
  }
}

std::string serialize_trace(const Workload& w) {
  std::ostringstream os;
  serialize_trace(w, os);
  return os.str();
}

void write_trace_file(const Workload& w, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write trace file: " + path);
  serialize_trace(w, out);
}

Workload generate_synthetic(const SyntheticParams& params) {
  if (params.write_fraction < 0 || params.write_fraction > 1)
    fail(ErrorKind::config, "write_fraction must be in [0,1]");
  if (params.streaming_fraction < 0 || params.streaming_fraction > 1)
    fail(ErrorKind::config, "streaming_fraction must be in [0,1]");
  if (params.working_set_lines < 1 || params.event_count < 1 ||
      params.instr_per_event_mean < 1)
    fail(ErrorKind::config, "counts must be >= 1");
  if (params.reuse_gap_mean_ns <= 0)
    fail(ErrorKind::config, "reuse_gap_mean_ns must be > 0");

  constexpr double kNsPerInstr = 0.5;  // 2GHz, CPI 1 nominal pacing
  constexpr uint64_t kLineBytes = 64;
  constexpr uint64_t kStreamBase = 1ULL << 32;  // away from the hot pool

  // Hot writes arrive every spacing_ns on average; picking a line uniformly
  // from a pool of size W makes per-line write-to-write gaps geometric with
  // mean W * spacing_ns. Size the pool to hit reuse_gap_mean_ns, capped at
  // working_set_lines (a binding cap stretches the realized mean).
  double hot_share =
      (1.0 - params.streaming_fraction) * params.write_fraction;
  double spacing_ns =
      static_cast<double>(params.instr_per_event_mean) * kNsPerInstr;
  uint64_t pool = params.working_set_lines;
  if (hot_share > 0) {
    double ideal = params.reuse_gap_mean_ns * hot_share / spacing_ns;
    pool = std::min<uint64_t>(
        params.working_set_lines,
        std::max<uint64_t>(1, static_cast<uint64_t>(std::llround(ideal))));
  }

  Rng rng(params.seed);
  Workload w;
  w.phases.push_back({"p0", 1.0, {}});
  auto& events = w.phases[0].events;
  events.reserve(params.event_count);
  uint64_t next_stream_line = 0;
  double gap_mean = static_cast<double>(params.instr_per_event_mean);
  for (uint64_t i = 0; i < params.event_count; ++i) {
    AccessEvent e;
    // Mean instr_per_event_mean per event including the event instruction.
    double g = rng.exponential(std::max(0.0, gap_mean - 1.0));
    e.instr_gap = static_cast<uint64_t>(std::llround(g));
    e.kind = rng.bernoulli(params.write_fraction) ? AccessKind::write
                                                  : AccessKind::read;
    if (rng.bernoulli(params.streaming_fraction)) {
      e.address = kStreamBase + (next_stream_line++) * kLineBytes;
    } else {
      e.address = rng.below(pool) * kLineBytes;
    }
    events.push_back(e);
  }
  return w;
}

Workload interleave(const std::vector<Workload>& workloads,
                    InterleavePolicy policy) {
  (void)policy;  // only round_robin exists
  if (workloads.empty())
    fail(ErrorKind::schema, "interleave requires at least one workload");
  if (workloads.size() > 8)
    fail(ErrorKind::schema, "interleave supports at most 8 workloads");
  for (const auto& w : workloads) {
    if (!w.single_core())
      fail(ErrorKind::schema, "interleave inputs must be single-core");
    if (w.phases.size() != 1)
      fail(ErrorKind::schema, "interleave inputs must be single-phase");
  }
  Workload out;
  out.phases.push_back({"mp0", 1.0, {}});
  auto& events = out.phases[0].events;
  std::vector<size_t> cursor(workloads.size(), 0);
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t c = 0; c < workloads.size(); ++c) {
      const auto& src = workloads[c].phases[0].events;
      if (cursor[c] >= src.size()) continue;
      AccessEvent e = src[cursor[c]++];
      e.core = static_cast<uint32_t>(c);
      events.push_back(e);
      progress = true;
    }
  }
  return out;
}

Workload fuse(const Workload& a, const Workload& b, uint64_t b_address_offset) {
  if (a.phases.size() != 1 || b.phases.size() != 1 || !a.single_core() ||
      !b.single_core())
    fail(ErrorKind::schema, "fuse requires single-core single-phase inputs");
  struct Timed {
    uint64_t at;  // absolute instruction index of the event
    AccessEvent e;
  };
  std::vector<Timed> merged;
  merged.reserve(a.event_count() + b.event_count());
  uint64_t t = 0;
  for (const auto& e : a.phases[0].events) {
    t += e.instr_gap + 1;
    merged.push_back({t, e});
  }
  t = 0;
  for (auto e : b.phases[0].events) {
    t += e.instr_gap + 1;
    e.address += b_address_offset;
    merged.push_back({t, e});
  }
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Timed& x, const Timed& y) { return x.at < y.at; });
  Workload out;
  out.phases.push_back({a.phases[0].phase_id, 1.0, {}});
  auto& events = out.phases[0].events;
  events.reserve(merged.size());
  uint64_t prev = 0;
  for (const auto& m : merged) {
    AccessEvent e = m.e;
    uint64_t at = std::max(m.at, prev + 1);  // events are one instruction apart at least
    e.instr_gap = at - prev - 1;
    e.core = 0;
    events.push_back(e);
    prev = at;
  }
  return out;
}

}  // namespace retlab
