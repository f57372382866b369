#include "retlab/config.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "retlab/error.hpp"
#include "retlab/util.hpp"

namespace retlab {

namespace {

double parse_number(const std::string& value, const std::string& where) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty())
    fail(ErrorKind::parse, "config: bad number for " + where + ": '" + value + "'");
  return v;
}

uint64_t parse_count(const std::string& value, const std::string& where) {
  double v = parse_number(value, where);
  if (v < 0 || v != std::floor(v))
    fail(ErrorKind::parse, "config: " + where + " must be a nonnegative integer");
  return static_cast<uint64_t>(v);
}

double parse_duration_ns(const std::string& value, const std::string& where) {
  if (value == "inf") return kInfiniteRetention;
  std::string v = value;
  double scale = 1.0;
  auto ends_with = [&](const char* suffix) {
    size_t n = std::strlen(suffix);
    return v.size() > n && v.compare(v.size() - n, n, suffix) == 0;
  };
  if (ends_with("ns")) {
    v.resize(v.size() - 2);
  } else if (ends_with("us")) {
    scale = 1e3;
    v.resize(v.size() - 2);
  } else if (ends_with("ms")) {
    scale = 1e6;
    v.resize(v.size() - 2);
  } else {
    fail(ErrorKind::parse,
         "config: " + where + " needs a ns/us/ms suffix, got '" + value + "'");
  }
  return parse_number(v, where) * scale;
}

double parse_energy_nj(const std::string& value, const std::string& where) {
  std::string v = value;
  double scale = 1.0;
  auto ends_with = [&](const char* suffix) {
    size_t n = std::strlen(suffix);
    return v.size() > n && v.compare(v.size() - n, n, suffix) == 0;
  };
  if (ends_with("nj")) {
    v.resize(v.size() - 2);
  } else if (ends_with("uj")) {
    scale = 1e3;
    v.resize(v.size() - 2);
  } else {
    fail(ErrorKind::parse,
         "config: " + where + " needs a nj/uj suffix, got '" + value + "'");
  }
  return parse_number(v, where) * scale;
}

std::string dump_duration(double ns) {
  if (ns == kInfiniteRetention) return "inf";
  return format_double(ns) + "ns";
}

std::string dump_energy(double nj) { return format_double(nj) + "nj"; }

}  // namespace

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.profiles.push_back(sram_profile());
  for (auto& p : stt_retention_set()) c.profiles.push_back(p);
  return c;
}

const RetentionProfile& ExperimentConfig::profile_by_name(
    const std::string& name) const {
  for (const auto& p : profiles)
    if (p.name == name) return p;
  fail(ErrorKind::config, "unknown profile '" + name + "'");
}

PolicyConfig ExperimentConfig::policy() const {
  PolicyConfig pc;
  pc.retention_set.clear();
  for (const auto& p : profiles)
    if (p.device == DeviceKind::sttram) pc.retention_set.push_back(p);
  pc.base_index = pc.retention_set.size();
  for (size_t i = 0; i < pc.retention_set.size(); ++i)
    if (pc.retention_set[i].name == base_profile) pc.base_index = i;
  if (pc.base_index >= pc.retention_set.size())
    fail(ErrorKind::config,
         "base_profile '" + base_profile + "' is not an STT-RAM profile");
  pc.objective = objective;
  pc.profiling_window_instr = profiling_window;
  pc.feedback_window_instr = feedback_window;
  pc.feedback_epsilon = feedback_epsilon;
  pc.migration_cost_ns = migration_cost_ns;
  pc.prediction_cost_ns = prediction_cost_ns;
  pc.migration_transfer_energy_nj = migration_transfer_energy_nj;
  pc.sim = sim();
  return pc;
}

SimConfig ExperimentConfig::sim() const {
  SimConfig sc;
  sc.l1 = l1;
  sc.l2 = l2;
  sc.monitor = monitor;
  sc.timing = timing;
  return sc;
}

void ExperimentConfig::validate() const {
  l1.validate();
  l2.validate();
  timing.validate();
  monitor.validate();
  if (k < 1) fail(ErrorKind::config, "k must be >= 1");
  if (folds < 2) fail(ErrorKind::config, "folds must be >= 2");
  if (profiles.empty()) fail(ErrorKind::config, "no profiles configured");
  for (const auto& p : profiles) p.validate();
  policy().validate();
}

namespace {

struct IniReader {
  std::string section;
  std::map<std::string, bool> seen;

  void check_unseen(const std::string& key) {
    std::string full = section + "/" + key;
    if (seen.count(full))
      fail(ErrorKind::parse, "config: duplicate key '" + key + "' in [" +
                                 section + "]");
    seen[full] = true;
  }
};

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c = default_experiment_config();
  c.profiles.clear();  // the file's profile table replaces the default
  bool any_profile = false;

  IniReader reader;
  RetentionProfile* profile = nullptr;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv[0] == '#' || sv[0] == ';') continue;
    if (sv.front() == '[') {
      if (sv.back() != ']')
        fail(ErrorKind::parse,
             "config line " + std::to_string(line_no) + ": bad section header");
      std::string name(trim(sv.substr(1, sv.size() - 2)));
      if (name.rfind("profile ", 0) == 0) {
        RetentionProfile p;
        p.name = std::string(trim(std::string_view(name).substr(8)));
        if (p.name.empty())
          fail(ErrorKind::parse, "config line " + std::to_string(line_no) +
                                     ": profile needs a name");
        c.profiles.push_back(p);
        profile = &c.profiles.back();
        any_profile = true;
        reader.section = name;
        continue;
      }
      static const char* known[] = {"cache",  "l2",     "timing",
                                    "monitor", "learn", "policy",
                                    "experiment"};
      bool ok = false;
      for (const char* k : known) ok = ok || name == k;
      if (!ok)
        fail(ErrorKind::parse, "config line " + std::to_string(line_no) +
                                   ": unknown section [" + name + "]");
      reader.section = name;
      profile = nullptr;
      continue;
    }
    size_t eq = sv.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorKind::parse,
           "config line " + std::to_string(line_no) + ": expected key = value");
    std::string key(trim(sv.substr(0, eq)));
    std::string value(trim(sv.substr(eq + 1)));
    reader.check_unseen(key);
    const std::string& s = reader.section;

    auto unknown = [&]() {
      fail(ErrorKind::parse, "config line " + std::to_string(line_no) +
                                 ": unknown key '" + key + "' in [" + s + "]");
    };

    if (profile) {
      if (key == "device") {
        if (value == "sram")
          profile->device = DeviceKind::sram;
        else if (value == "sttram")
          profile->device = DeviceKind::sttram;
        else
          fail(ErrorKind::parse, "config: device must be sram or sttram");
      } else if (key == "retention")
        profile->retention_time_ns = parse_duration_ns(value, key);
      else if (key == "hit_latency")
        profile->hit_latency_ns = parse_duration_ns(value, key);
      else if (key == "write_latency")
        profile->write_latency_ns = parse_duration_ns(value, key);
      else if (key == "read_energy")
        profile->read_energy_nj = parse_energy_nj(value, key);
      else if (key == "write_energy")
        profile->write_energy_nj = parse_energy_nj(value, key);
      else if (key == "leakage_mw")
        profile->leakage_mw = parse_number(value, key);
      else
        unknown();
    } else if (s == "cache" || s == "l2") {
      CacheGeometry& g = s == "cache" ? c.l1 : c.l2;
      if (key == "capacity_bytes")
        g.capacity_bytes = parse_count(value, key);
      else if (key == "line_bytes")
        g.line_bytes = static_cast<uint32_t>(parse_count(value, key));
      else if (key == "associativity")
        g.associativity = static_cast<uint32_t>(parse_count(value, key));
      else
        unknown();
    } else if (s == "timing") {
      if (key == "frequency_hz")
        c.timing.frequency_hz = parse_number(value, key);
      else if (key == "base_cpi")
        c.timing.base_cpi = parse_number(value, key);
      else if (key == "hit_cycles")
        c.timing.hit_cycles = static_cast<uint32_t>(parse_count(value, key));
      else if (key == "l2_hit_penalty_cycles")
        c.timing.l2_hit_penalty_cycles =
            static_cast<uint32_t>(parse_count(value, key));
      else if (key == "memory_penalty_cycles")
        c.timing.memory_penalty_cycles =
            static_cast<uint32_t>(parse_count(value, key));
      else if (key == "l2_access_energy")
        c.timing.l2_access_energy_nj = parse_energy_nj(value, key);
      else
        unknown();
    } else if (s == "monitor") {
      if (key == "n_states")
        c.monitor.n_states = static_cast<int>(parse_count(value, key));
      else if (key == "aging_clock") {
        if (value == "simulated")
          c.monitor.aging_clock = AgingClock::simulated_time;
        else if (value == "nominal")
          c.monitor.aging_clock = AgingClock::nominal_time;
        else
          fail(ErrorKind::parse, "config: aging_clock must be simulated or nominal");
      } else
        unknown();
    } else if (s == "learn") {
      if (key == "k")
        c.k = static_cast<int>(parse_count(value, key));
      else if (key == "folds")
        c.folds = static_cast<int>(parse_count(value, key));
      else
        unknown();
    } else if (s == "policy") {
      if (key == "objective")
        c.objective = objective_from_name(value);
      else if (key == "base_profile")
        c.base_profile = value;
      else if (key == "profiling_window")
        c.profiling_window = parse_count(value, key);
      else if (key == "feedback_window")
        c.feedback_window = parse_count(value, key);
      else if (key == "feedback_epsilon")
        c.feedback_epsilon = parse_number(value, key);
      else if (key == "migration_cost")
        c.migration_cost_ns = parse_duration_ns(value, key);
      else if (key == "prediction_cost")
        c.prediction_cost_ns = parse_duration_ns(value, key);
      else if (key == "migration_transfer_energy")
        c.migration_transfer_energy_nj = parse_energy_nj(value, key);
      else
        unknown();
    } else if (s == "experiment") {
      if (key == "seed")
        c.seed = parse_count(value, key);
      else if (key == "manifest")
        c.manifest = value;
      else
        unknown();
    } else {
      fail(ErrorKind::parse, "config line " + std::to_string(line_no) +
                                 ": key outside any section");
    }
  }
  if (!any_profile) {
    c.profiles.push_back(sram_profile());
    for (auto& p : stt_retention_set()) c.profiles.push_back(p);
  }
  c.validate();
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file: " + path);
  return parse_config(in);
}

std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[cache]\n";
  out << "capacity_bytes = " << c.l1.capacity_bytes << '\n';
  out << "line_bytes = " << c.l1.line_bytes << '\n';
  out << "associativity = " << c.l1.associativity << '\n';
  out << "\n[l2]\n";
  out << "capacity_bytes = " << c.l2.capacity_bytes << '\n';
  out << "line_bytes = " << c.l2.line_bytes << '\n';
  out << "associativity = " << c.l2.associativity << '\n';
  out << "\n[timing]\n";
  out << "frequency_hz = " << format_double(c.timing.frequency_hz) << '\n';
  out << "base_cpi = " << format_double(c.timing.base_cpi) << '\n';
  out << "hit_cycles = " << c.timing.hit_cycles << '\n';
  out << "l2_hit_penalty_cycles = " << c.timing.l2_hit_penalty_cycles << '\n';
  out << "memory_penalty_cycles = " << c.timing.memory_penalty_cycles << '\n';
  out << "l2_access_energy = " << dump_energy(c.timing.l2_access_energy_nj)
      << '\n';
  out << "\n[monitor]\n";
  out << "n_states = " << c.monitor.n_states << '\n';
  out << "aging_clock = "
      << (c.monitor.aging_clock == AgingClock::simulated_time ? "simulated"
                                                              : "nominal")
      << '\n';
  out << "\n[learn]\n";
  out << "k = " << c.k << '\n';
  out << "folds = " << c.folds << '\n';
  out << "\n[policy]\n";
  out << "objective = " << objective_name(c.objective) << '\n';
  out << "base_profile = " << c.base_profile << '\n';
  out << "profiling_window = " << c.profiling_window << '\n';
  out << "feedback_window = " << c.feedback_window << '\n';
  out << "feedback_epsilon = " << format_double(c.feedback_epsilon) << '\n';
  out << "migration_cost = " << dump_duration(c.migration_cost_ns) << '\n';
  out << "prediction_cost = " << dump_duration(c.prediction_cost_ns) << '\n';
  out << "migration_transfer_energy = "
      << dump_energy(c.migration_transfer_energy_nj) << '\n';
  out << "\n[experiment]\n";
  out << "seed = " << c.seed << '\n';
  if (!c.manifest.empty()) out << "manifest = " << c.manifest << '\n';
  for (const auto& p : c.profiles) {
    out << "\n[profile " << p.name << "]\n";
    out << "device = " << (p.device == DeviceKind::sram ? "sram" : "sttram")
        << '\n';
    out << "retention = " << dump_duration(p.retention_time_ns) << '\n';
    out << "hit_latency = " << dump_duration(p.hit_latency_ns) << '\n';
    out << "write_latency = " << dump_duration(p.write_latency_ns) << '\n';
    out << "read_energy = " << dump_energy(p.read_energy_nj) << '\n';
    out << "write_energy = " << dump_energy(p.write_energy_nj) << '\n';
    out << "leakage_mw = " << format_double(p.leakage_mw) << '\n';
  }
  return out.str();
}

}  // namespace retlab
