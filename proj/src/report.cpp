#include "retlab/report.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "retlab/error.hpp"
#include "retlab/util.hpp"
#include "retlab/version.hpp"

namespace retlab {

using nlohmann::json;

namespace {

json stats_json(const SimStats& s) {
  return json{{"instructions", s.instructions},
              {"l1_reads", s.l1_reads},
              {"l1_writes", s.l1_writes},
              {"l1_read_misses", s.l1_read_misses},
              {"l1_write_misses", s.l1_write_misses},
              {"l1_fills", s.l1_fills},
              {"l1_evictions", s.l1_evictions},
              {"l1_writebacks", s.l1_writebacks},
              {"expiry_evictions", s.expiry_evictions},
              {"expiry_writebacks", s.expiry_writebacks},
              {"l2_accesses", s.l2_accesses},
              {"l2_misses", s.l2_misses},
              {"l2_writebacks", s.l2_writebacks},
              {"unique_lines", s.unique_lines},
              {"single_access_lines", s.single_access_lines},
              {"stall_cycles", s.stall_cycles},
              {"cycles", s.cycles},
              {"sim_time_ns", s.sim_time_ns}};
}

json geometry_json(const CacheGeometry& g) {
  return json{{"capacity_bytes", g.capacity_bytes},
              {"line_bytes", g.line_bytes},
              {"associativity", g.associativity}};
}

json timing_json(const TimingParams& t) {
  return json{{"frequency_hz", t.frequency_hz},
              {"base_cpi", t.base_cpi},
              {"hit_cycles", t.hit_cycles},
              {"l2_hit_penalty_cycles", t.l2_hit_penalty_cycles},
              {"memory_penalty_cycles", t.memory_penalty_cycles},
              {"l2_access_energy_nj", t.l2_access_energy_nj}};
}

json policy_config_json(const PolicyConfig& pc) {
  return json{{"base_profile", pc.base_profile().name},
              {"objective", objective_name(pc.objective)},
              {"profiling_window_instr", pc.profiling_window_instr},
              {"feedback_window_instr", pc.feedback_window_instr},
              {"feedback_epsilon", pc.feedback_epsilon},
              {"migration_cost_ns", pc.migration_cost_ns},
              {"prediction_cost_ns", pc.prediction_cost_ns},
              {"migration_transfer_energy_nj", pc.migration_transfer_energy_nj},
              {"l1", geometry_json(pc.sim.l1)},
              {"l2", geometry_json(pc.sim.l2)},
              {"timing", timing_json(pc.sim.timing)},
              {"monitor_n_states", pc.sim.monitor.n_states}};
}

const char* kNotes[] = {
    "l2 penalty and l2 access energy constants are configuration placeholders",
    "expiry writebacks are charged as l2 accesses",
};

json notes_json() {
  json notes = json::array();
  for (const char* n : kNotes) notes.push_back(n);
  return notes;
}

}  // namespace

std::string stats_to_json(const SimResult& result, const RetentionProfile& profile,
                          const TimingParams& timing, const MonitorConfig& monitor,
                          const std::string& workload_id,
                          const std::string& input_hash) {
  EnergyReport energy = compute_energy(result.total, profile, timing);
  json j;
  j["version"] = kVersion;
  j["catalog"] = default_catalog().version;
  j["workload"] = workload_id;
  j["input_hash"] = input_hash;
  j["profile"] = profile.name;
  j["monitor"] = {{"n_states", monitor.n_states},
                  {"bits_per_block", monitor.bits_per_block()},
                  {"expiry_threshold_fraction",
                   double(monitor.n_states - 1) / monitor.n_states}};
  j["timing"] = timing_json(timing);
  j["stats"] = stats_json(result.total);
  j["energy"] = {{"dynamic_read_nj", energy.dynamic_read_nj},
                 {"dynamic_write_nj", energy.dynamic_write_nj},
                 {"leakage_nj", energy.leakage_nj},
                 {"l2_charge_nj", energy.l2_charge_nj},
                 {"total_nj", energy.total_nj},
                 {"latency_ns", energy.latency_ns}};
  json phases = json::array();
  for (const auto& p : result.phases) {
    EnergyReport pe = compute_energy(p.stats, profile, timing);
    phases.push_back({{"phase", p.phase_id},
                      {"weight", p.weight},
                      {"stats", stats_json(p.stats)},
                      {"latency_ns", pe.latency_ns},
                      {"energy_nj", pe.total_nj}});
  }
  j["phases"] = phases;
  j["notes"] = notes_json();
  return j.dump(2) + "\n";
}

void write_dataset_csv(const std::vector<DatasetRow>& rows,
                       const FeatureCatalog& catalog,
                       const std::vector<std::string>& profile_names,
                       std::ostream& out) {
  out << "# retention-lab dataset v1\n";
  out << "# catalog " << catalog.version << '\n';
  out << "# version " << kVersion << '\n';
  out << "workload,phase,weight";
  for (const auto& n : catalog.names) out << ',' << n;
  for (const auto& n : profile_names) out << ",lat_" << n;
  for (const auto& n : profile_names) out << ",en_" << n;
  out << ",best_latency,best_energy\n";
  for (const auto& r : rows) {
    out << r.workload_id << ',' << r.phase_id << ',' << format_double(r.weight);
    for (double v : r.features) out << ',' << format_double(v);
    for (double v : r.latency_by_profile) out << ',' << format_double(v);
    for (double v : r.energy_by_profile) out << ',' << format_double(v);
    out << ',' << r.best_latency << ',' << r.best_energy << '\n';
  }
}

std::vector<DatasetRow> read_dataset_csv(std::istream& in,
                                         const FeatureCatalog& expected_catalog,
                                         size_t n_profiles) {
  std::vector<DatasetRow> rows;
  std::string line;
  bool header_seen = false;
  bool catalog_seen = false;
  size_t n_features = expected_catalog.size();
  size_t expected_cols = 3 + n_features + 2 * n_profiles + 2;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv[0] == '#') {
      auto toks = split_ws(sv);
      if (toks.size() >= 3 && toks[1] == "catalog") {
        catalog_seen = true;
        if (toks[2] != expected_catalog.version)
          fail(ErrorKind::catalog_mismatch,
               "dataset catalog '" + std::string(toks[2]) +
                   "' does not match expected '" + expected_catalog.version + "'");
      }
      continue;
    }
    std::vector<std::string> cells;
    size_t start = 0;
    std::string row_s(sv);
    while (true) {
      size_t comma = row_s.find(',', start);
      cells.push_back(row_s.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!header_seen) {
      header_seen = true;
      if (cells.size() != expected_cols)
        fail(ErrorKind::schema, "dataset header has " +
                                    std::to_string(cells.size()) +
                                    " columns, expected " +
                                    std::to_string(expected_cols));
      for (size_t i = 0; i < n_features; ++i)
        if (cells[3 + i] != expected_catalog.names[i])
          fail(ErrorKind::catalog_mismatch,
               "dataset feature column '" + cells[3 + i] +
                   "' does not match catalog feature '" +
                   expected_catalog.names[i] + "'");
      continue;
    }
    if (cells.size() != expected_cols)
      fail(ErrorKind::parse, "dataset line " + std::to_string(line_no) +
                                 ": wrong column count");
    DatasetRow r;
    r.workload_id = cells[0];
    r.phase_id = cells[1];
    size_t col = 2;
    auto num = [&](const std::string& cell) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size())
        fail(ErrorKind::parse, "dataset line " + std::to_string(line_no) +
                                   ": bad number '" + cell + "'");
      return v;
    };
    r.weight = num(cells[col++]);
    for (size_t i = 0; i < n_features; ++i) r.features.push_back(num(cells[col++]));
    for (size_t i = 0; i < n_profiles; ++i)
      r.latency_by_profile.push_back(num(cells[col++]));
    for (size_t i = 0; i < n_profiles; ++i)
      r.energy_by_profile.push_back(num(cells[col++]));
    r.best_latency = static_cast<int>(num(cells[col++]));
    r.best_energy = static_cast<int>(num(cells[col++]));
    rows.push_back(std::move(r));
  }
  if (!catalog_seen)
    fail(ErrorKind::schema, "dataset file is missing the catalog header");
  return rows;
}

void write_dataset_file(const std::vector<DatasetRow>& rows,
                        const FeatureCatalog& catalog,
                        const std::vector<std::string>& profile_names,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write dataset: " + path);
  write_dataset_csv(rows, catalog, profile_names, out);
}

std::vector<DatasetRow> read_dataset_file(const std::string& path,
                                          const FeatureCatalog& expected_catalog,
                                          size_t n_profiles) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open dataset: " + path);
  return read_dataset_csv(in, expected_catalog, n_profiles);
}

std::string eval_report_to_json(const EvalReport& report,
                                const std::string& objective) {
  json j;
  j["version"] = kVersion;
  j["catalog"] = default_catalog().version;
  j["objective"] = objective;
  j["folds"] = report.folds;
  j["seed"] = report.seed;
  j["f_score"] = report.f_score;
  j["confusion"] = report.confusion;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["mean_distance_ops"] = report.mean_distance_ops;
  // Wall-clock measurements live in their own optional section so that the
  // rest of the report is byte-stable across runs.
  j["timing"] = {{"mean_prediction_time_us", report.mean_prediction_time_us}};
  return j.dump(2) + "\n";
}

std::string elimination_curve_csv(const EliminationResult& result,
                                  const FeatureCatalog& catalog) {
  std::ostringstream out;
  out << "# retention-lab feature-curve v1\n";
  out << "# catalog " << catalog.version << '\n';
  out << "n_features,f_score,mean_distance_ops,mean_prediction_time_us\n";
  for (const auto& p : result.curve)
    out << p.n_features << ',' << format_double(p.f_score) << ','
        << p.mean_distance_ops << ',' << format_double(p.mean_prediction_time_us)
        << '\n';
  return out.str();
}

void write_selected_features(const std::vector<size_t>& selected,
                             const FeatureCatalog& catalog, std::ostream& out) {
  out << "retlab-features " << catalog.version << '\n';
  for (size_t idx : selected) out << catalog.names.at(idx) << '\n';
}

std::vector<size_t> read_selected_features(std::istream& in,
                                           const FeatureCatalog& expected_catalog) {
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::parse, "selected-features file is empty");
  auto toks = split_ws(trim(line));
  if (toks.size() != 2 || toks[0] != "retlab-features")
    fail(ErrorKind::parse, "selected-features file: bad header");
  if (toks[1] != expected_catalog.version)
    fail(ErrorKind::catalog_mismatch,
         "selected-features catalog does not match");
  std::vector<size_t> out;
  while (std::getline(in, line)) {
    std::string name(trim(line));
    if (name.empty()) continue;
    size_t idx = expected_catalog.size();
    for (size_t i = 0; i < expected_catalog.size(); ++i)
      if (expected_catalog.names[i] == name) idx = i;
    if (idx == expected_catalog.size())
      fail(ErrorKind::schema, "unknown feature '" + name + "'");
    out.push_back(idx);
  }
  if (out.empty()) fail(ErrorKind::schema, "no features selected");
  return out;
}

namespace {

json phase_json(const PhaseDecision& d) {
  return json{{"phase", d.phase_id},
              {"weight", d.weight},
              {"predicted_index", d.predicted_index},
              {"final_index", d.final_index},
              {"migrations", d.migrations},
              {"reverted", d.reverted},
              {"instructions", d.instructions},
              {"latency_ns", d.latency_ns},
              {"energy_nj", d.energy_nj},
              {"overhead_ns", d.overhead_ns},
              {"overhead_energy_nj", d.overhead_energy_nj},
              {"objective_value", d.objective_value}};
}

}  // namespace

std::string policy_result_to_json(const PolicyResult& result,
                                  const PolicyConfig& config,
                                  const std::string& input_hash) {
  json j;
  j["version"] = kVersion;
  j["catalog"] = default_catalog().version;
  j["mode"] = result.mode;
  j["objective"] = objective_name(result.objective);
  j["workload"] = result.workload_id;
  j["input_hash"] = input_hash;
  json profiles = json::array();
  for (const auto& p : config.retention_set) profiles.push_back(p.name);
  j["retention_set"] = profiles;
  j["totals"] = {{"objective_total", result.objective_total},
                 {"latency_total_ns", result.latency_total_ns},
                 {"energy_total_nj", result.energy_total_nj},
                 {"overhead_ns", result.overhead_ns},
                 {"prediction_overhead_ns", result.prediction_overhead_ns},
                 {"migrations", result.migrations},
                 {"reverts", result.reverts}};
  json phases = json::array();
  for (const auto& d : result.phases) phases.push_back(phase_json(d));
  j["phases"] = phases;
  j["config"] = policy_config_json(config);
  j["notes"] = notes_json();
  return j.dump(2) + "\n";
}

PolicyResult read_policy_result_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open result file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, "result file " + path + ": " + e.what());
  }
  if (!j.contains("catalog") || !j.contains("totals"))
    fail(ErrorKind::schema, "result file " + path + ": missing fields");
  if (j["catalog"].get<std::string>() != default_catalog().version)
    fail(ErrorKind::catalog_mismatch,
         "result file " + path + " was produced with a different catalog");
  PolicyResult r;
  r.workload_id = j.value("workload", "");
  r.mode = j.value("mode", "");
  r.objective = objective_from_name(j.value("objective", "latency"));
  const auto& t = j["totals"];
  r.objective_total = t.value("objective_total", 0.0);
  r.latency_total_ns = t.value("latency_total_ns", 0.0);
  r.energy_total_nj = t.value("energy_total_nj", 0.0);
  r.overhead_ns = t.value("overhead_ns", 0.0);
  r.prediction_overhead_ns = t.value("prediction_overhead_ns", 0.0);
  r.migrations = t.value("migrations", 0);
  r.reverts = t.value("reverts", 0);
  return r;
}

std::string exhaustive_table_to_json(const ExhaustiveTable& table,
                                     const PolicyConfig& config,
                                     const std::string& input_hash) {
  json j;
  j["version"] = kVersion;
  j["catalog"] = default_catalog().version;
  j["mode"] = "exhaustive";
  j["workload"] = table.workload_id;
  j["input_hash"] = input_hash;
  json profiles = json::array();
  for (const auto& p : config.retention_set) profiles.push_back(p.name);
  j["retention_set"] = profiles;
  json phases = json::array();
  for (const auto& p : table.phases) {
    json entries = json::array();
    for (const auto& e : p.per_profile)
      entries.push_back({{"latency_ns", e.latency_ns}, {"energy_nj", e.energy_nj}});
    phases.push_back({{"phase", p.phase_id},
                      {"weight", p.weight},
                      {"instructions", p.instructions},
                      {"table", entries},
                      {"best_latency", p.best_latency},
                      {"best_energy", p.best_energy}});
  }
  j["phases"] = phases;
  j["totals"] = {{"best_latency_total_ns", table.best_total(Objective::latency)},
                 {"best_energy_total_nj", table.best_total(Objective::energy)}};
  j["config"] = policy_config_json(config);
  j["notes"] = notes_json();
  return j.dump(2) + "\n";
}

std::string savings_to_csv(const SavingsReport& report) {
  std::ostringstream out;
  out << "# retention-lab savings v1\n";
  out << "# version " << kVersion << '\n';
  out << "# objective " << objective_name(report.objective) << '\n';
  out << "workload,baseline,policy,savings_pct\n";
  for (const auto& r : report.rows)
    out << r.workload_id << ',' << format_double(r.baseline) << ','
        << format_double(r.policy) << ','
        << format_double(100.0 * r.savings_fraction) << '\n';
  out << "aggregate_geomean,,," << format_double(100.0 * report.aggregate_savings_fraction)
      << '\n';
  return out.str();
}

}  // namespace retlab
