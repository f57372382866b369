#include "retlab/policy.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <thread>

#include "retlab/error.hpp"

namespace retlab {

void PolicyConfig::validate() const {
  if (retention_set.empty())
    fail(ErrorKind::config, "retention_set must not be empty");
  if (base_index >= retention_set.size())
    fail(ErrorKind::config, "base_index out of range");
  for (const auto& p : retention_set) p.validate();
  if (feedback_epsilon < 0)
    fail(ErrorKind::config, "feedback_epsilon must be >= 0");
  if (profiling_window_instr < 1 || feedback_window_instr < 1)
    fail(ErrorKind::config, "windows must be >= 1 instruction");
  if (migration_cost_ns < 0 || prediction_cost_ns < 0)
    fail(ErrorKind::config, "overhead costs must be >= 0");
  sim.validate();
}

size_t select_best(std::span<const double> values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return best;
}

double ExhaustiveTable::best_total(Objective o) const {
  double total = 0;
  for (const auto& p : phases)
    total += p.weight * p.per_profile[p.best(o)].value(o);
  return total;
}

namespace {

constexpr uint64_t kToEnd = ~0ULL;

void parallel_for(size_t n, unsigned jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  unsigned count = std::min<unsigned>(jobs, static_cast<unsigned>(n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

struct Segment {
  SimStats delta;
  size_t unit = 0;
  uint64_t instructions = 0;
  double latency_ns = 0;
  double energy_nj = 0;

  double objective(Objective o) const {
    return o == Objective::latency ? latency_ns : energy_nj;
  }
  double rate(Objective o) const {
    return instructions ? objective(o) / static_cast<double>(instructions) : 0.0;
  }
};

// Event cursor over one phase with a retention-unit bank; produces
// per-segment stats deltas with latency/energy under the active profile.
class PhaseEngine {
 public:
  PhaseEngine(std::span<const AccessEvent> events, const SimConfig& sim,
              std::span<const RetentionProfile> units, size_t start_unit,
              L2Cache& l2)
      : events_(events),
        units_(units),
        timing_(sim.timing),
        core_(sim, units, start_unit, l2) {}

  bool done() const { return cursor_ >= events_.size(); }

  Segment run(size_t unit, uint64_t instr_budget) {
    core_.switch_unit(unit);
    SimStats before = core_.snapshot();
    uint64_t start_instr = core_.instructions();
    while (cursor_ < events_.size() &&
           core_.instructions() - start_instr < instr_budget)
      core_.step(events_[cursor_++]);
    if (cursor_ >= events_.size()) core_.finish();
    SimStats after = core_.snapshot();
    Segment s;
    s.delta = after.diff_since(before);
    s.unit = unit;
    s.instructions = s.delta.instructions;
    s.latency_ns = compute_latency_ns(s.delta, units_[unit], timing_);
    s.energy_nj = compute_energy(s.delta, units_[unit], timing_).total_nj;
    return s;
  }

 private:
  std::span<const AccessEvent> events_;
  std::span<const RetentionProfile> units_;
  TimingParams timing_;
  size_t cursor_ = 0;
  CoreSim core_;
};

// mW over ns is 1e-3 nJ.
double span_leakage_nj(double duration_ns, double leak_mw) {
  return duration_ns * leak_mw * 1e-3;
}

double migration_energy_nj(const PolicyConfig& cfg, size_t from, size_t to) {
  const auto& a = cfg.retention_set[from];
  const auto& b = cfg.retention_set[to];
  return span_leakage_nj(cfg.migration_cost_ns, a.leakage_mw + b.leakage_mw) +
         cfg.migration_transfer_energy_nj;
}

PhaseDecision finalize_phase(const PolicyConfig& cfg, const std::string& phase_id,
                             double weight, std::span<const Segment> segments,
                             int predicted, int final_unit, bool reverted,
                             const std::vector<std::pair<size_t, size_t>>& moves,
                             bool prediction_charged) {
  PhaseDecision d;
  d.phase_id = phase_id;
  d.weight = weight;
  d.predicted_index = predicted;
  d.final_index = final_unit;
  d.reverted = reverted;
  d.migrations = static_cast<int>(moves.size());
  for (const auto& s : segments) {
    d.instructions += s.instructions;
    d.latency_ns += s.latency_ns;
    d.energy_nj += s.energy_nj;
    d.stats += s.delta;
  }
  if (prediction_charged) {
    d.overhead_ns += cfg.prediction_cost_ns;
    d.overhead_energy_nj += span_leakage_nj(
        cfg.prediction_cost_ns, cfg.base_profile().leakage_mw);
  }
  for (auto [from, to] : moves) {
    d.overhead_ns += cfg.migration_cost_ns;
    d.overhead_energy_nj += migration_energy_nj(cfg, from, to);
  }
  d.objective_value = cfg.objective == Objective::latency
                          ? d.latency_ns + d.overhead_ns
                          : d.energy_nj + d.overhead_energy_nj;
  return d;
}

void fold_result_totals(PolicyResult& r, const PolicyConfig& cfg) {
  for (const auto& d : r.phases) {
    r.migrations += d.migrations;
    if (d.reverted) ++r.reverts;
    r.overhead_ns += d.overhead_ns;
    r.latency_total_ns += d.weight * (d.latency_ns + d.overhead_ns);
    r.energy_total_nj += d.weight * (d.energy_nj + d.overhead_energy_nj);
  }
  r.objective_total = cfg.objective == Objective::latency ? r.latency_total_ns
                                                          : r.energy_total_nj;
}

void check_model(const KnnModel& model, const PolicyConfig& cfg) {
  if (model.catalog_version != default_catalog().version)
    fail(ErrorKind::catalog_mismatch,
         "model catalog version '" + model.catalog_version +
             "' does not match this build's catalog '" +
             default_catalog().version + "'");
  if (model.objective != cfg.objective)
    fail(ErrorKind::config, "model was trained for the other objective");
  if (model.n_classes != static_cast<int>(cfg.retention_set.size()))
    fail(ErrorKind::schema, "model class count does not match retention set");
}

struct PhaseRun {
  double latency_ns = 0;
  double energy_nj = 0;
  uint64_t instructions = 0;
};

PhaseRun run_phase_once(std::span<const AccessEvent> events, const SimConfig& sim,
                        const RetentionProfile& profile) {
  SimConfig cfg = sim;
  cfg.collect_line_stats = false;
  L2Cache l2(cfg.l2);
  std::array<RetentionProfile, 1> units{profile};
  PhaseEngine eng(events, cfg, units, 0, l2);
  Segment s = eng.run(0, kToEnd);
  return {s.latency_ns, s.energy_nj, s.instructions};
}

}  // namespace

ExhaustiveTable label_exhaustive(const Workload& workload,
                                 const PolicyConfig& config, unsigned jobs) {
  config.validate();
  if (!workload.single_core())
    fail(ErrorKind::schema, "label_exhaustive requires a single-core workload");
  ExhaustiveTable table;
  size_t n_profiles = config.retention_set.size();
  table.phases.resize(workload.phases.size());
  for (size_t p = 0; p < workload.phases.size(); ++p) {
    table.phases[p].phase_id = workload.phases[p].phase_id;
    table.phases[p].weight = workload.phases[p].weight;
    table.phases[p].instructions = workload.phases[p].instruction_count();
    table.phases[p].per_profile.resize(n_profiles);
  }
  size_t tasks = workload.phases.size() * n_profiles;
  parallel_for(tasks, jobs, [&](size_t t) {
    size_t p = t / n_profiles;
    size_t prof = t % n_profiles;
    PhaseRun r = run_phase_once(workload.phases[p].events, config.sim,
                                config.retention_set[prof]);
    table.phases[p].per_profile[prof] = {r.latency_ns, r.energy_nj};
  });
  for (auto& phase : table.phases) {
    std::vector<double> lat(n_profiles), en(n_profiles);
    for (size_t i = 0; i < n_profiles; ++i) {
      lat[i] = phase.per_profile[i].latency_ns;
      en[i] = phase.per_profile[i].energy_nj;
    }
    phase.best_latency = select_best(lat);
    phase.best_energy = select_best(en);
  }
  return table;
}

PolicyResult run_static(const Workload& workload, const PolicyConfig& config,
                        const RetentionProfile& profile) {
  config.validate();
  profile.validate();
  if (profile.device == DeviceKind::sttram && !profile.volatile_cell())
    fail(ErrorKind::config,
         "profile " + profile.name +
             ": infinite retention with STT-RAM energy constants");
  if (!workload.single_core())
    fail(ErrorKind::schema, "run_static requires a single-core workload");

  int index = -1;
  for (size_t i = 0; i < config.retention_set.size(); ++i)
    if (config.retention_set[i].name == profile.name) index = static_cast<int>(i);

  PolicyResult result;
  result.mode = "static";
  result.objective = config.objective;
  std::array<RetentionProfile, 1> units{profile};
  for (const auto& phase : workload.phases) {
    SimConfig sim = config.sim;
    sim.collect_line_stats = false;
    L2Cache l2(sim.l2);
    PhaseEngine eng(phase.events, sim, units, 0, l2);
    Segment s = eng.run(0, kToEnd);
    PhaseDecision d = finalize_phase(config, phase.phase_id, phase.weight,
                                     std::span(&s, 1), -1, index, false, {},
                                     false);
    result.phases.push_back(std::move(d));
  }
  fold_result_totals(result, config);
  return result;
}

PolicyResult run_scart(const Workload& workload, const KnnModel& model,
                       const PolicyConfig& config) {
  config.validate();
  check_model(model, config);
  if (!workload.single_core())
    fail(ErrorKind::schema, "run_scart requires a single-core workload");

  const auto& catalog = default_catalog();
  size_t base = config.base_index;
  PolicyResult result;
  result.mode = "scart";
  result.objective = config.objective;

  for (const auto& phase : workload.phases) {
    SimConfig sim = config.sim;
    sim.collect_line_stats = true;
    L2Cache l2(sim.l2);
    PhaseEngine eng(phase.events, sim, config.retention_set, base, l2);

    std::vector<Segment> segments;
    std::vector<std::pair<size_t, size_t>> moves;
    int predicted = -1;
    bool reverted = false;
    bool prediction_charged = false;
    size_t final_unit = base;

    Segment window = eng.run(base, config.profiling_window_instr);
    segments.push_back(window);
    if (!eng.done()) {
      std::vector<double> features = extract(window.delta, catalog);
      predicted = model.predict(features);
      prediction_charged = true;
      if (predicted != static_cast<int>(base)) {
        moves.emplace_back(base, predicted);
        Segment feedback = eng.run(predicted, config.feedback_window_instr);
        segments.push_back(feedback);
        final_unit = predicted;
        if (!eng.done()) {
          double base_rate = window.rate(config.objective);
          double pred_rate = feedback.rate(config.objective);
          if (pred_rate > base_rate * (1.0 + config.feedback_epsilon)) {
            reverted = true;
            moves.emplace_back(predicted, base);
            final_unit = base;
            segments.push_back(eng.run(base, kToEnd));
          } else {
            segments.push_back(eng.run(predicted, kToEnd));
          }
        }
      } else {
        segments.push_back(eng.run(base, kToEnd));
      }
    }
    PhaseDecision d = finalize_phase(
        config, phase.phase_id, phase.weight, segments, predicted,
        static_cast<int>(final_unit), reverted, moves, prediction_charged);
    if (prediction_charged) result.prediction_overhead_ns += config.prediction_cost_ns;
    result.phases.push_back(std::move(d));
  }
  fold_result_totals(result, config);
  return result;
}

PolicyResult run_lars_sampling(const Workload& workload,
                               const PolicyConfig& config) {
  config.validate();
  if (!workload.single_core())
    fail(ErrorKind::schema, "run_lars_sampling requires a single-core workload");

  size_t n = config.retention_set.size();
  PolicyResult result;
  result.mode = "lars";
  result.objective = config.objective;

  for (const auto& phase : workload.phases) {
    SimConfig sim = config.sim;
    sim.collect_line_stats = false;
    L2Cache l2(sim.l2);
    PhaseEngine eng(phase.events, sim, config.retention_set, 0, l2);

    std::vector<Segment> segments;
    std::vector<double> rates;
    for (size_t unit = 0; unit < n && !eng.done(); ++unit) {
      Segment s = eng.run(unit, config.profiling_window_instr);
      rates.push_back(s.rate(config.objective));
      segments.push_back(std::move(s));
    }
    size_t best = rates.empty() ? 0 : select_best(rates);
    if (!eng.done()) segments.push_back(eng.run(best, kToEnd));

    // Charged as one migration per unit in the set (six for six units),
    // regardless of whether the final unit was the last one sampled.
    std::vector<std::pair<size_t, size_t>> moves;
    if (n > 1)
      for (size_t i = 0; i < n; ++i) moves.emplace_back(i % n, (i + 1) % n);

    PhaseDecision d =
        finalize_phase(config, phase.phase_id, phase.weight, segments, -1,
                       static_cast<int>(best), false, moves, false);
    result.phases.push_back(std::move(d));
  }
  fold_result_totals(result, config);
  return result;
}

// ---------------------------------------------------------------------------
// Multi-programmed mode: per-core SCART over one shared L2.

namespace {

struct McSegment {
  SimStats snapshot_at_start;
  size_t unit;
};

struct McCore {
  const Workload* workload = nullptr;
  size_t phase = 0;
  size_t event = 0;
  std::unique_ptr<CoreSim> sim;
  enum class Mode { window, feedback, settled } mode = Mode::window;
  std::vector<Segment> segments;
  SimStats seg_start;
  size_t seg_unit = 0;
  Segment window_seg;
  std::vector<std::pair<size_t, size_t>> moves;
  int predicted = -1;
  bool reverted = false;
  bool prediction_charged = false;
  size_t final_unit = 0;
  PolicyResult result;

  bool done() const { return phase >= workload->phases.size(); }
};

}  // namespace

std::vector<PolicyResult> run_multiprogrammed(
    std::span<const Workload> workloads, const KnnModel& model,
    const PolicyConfig& config) {
  config.validate();
  check_model(model, config);
  if (workloads.empty() || workloads.size() > 8)
    fail(ErrorKind::schema, "multi-programmed mode supports 1..8 cores");
  for (const auto& w : workloads)
    if (!w.single_core())
      fail(ErrorKind::schema, "each multi-programmed workload must be single-core");

  const auto& catalog = default_catalog();
  size_t base = config.base_index;
  SimConfig sim = config.sim;
  sim.collect_line_stats = true;
  L2Cache shared_l2(sim.l2);

  std::vector<McCore> cores(workloads.size());
  for (size_t c = 0; c < workloads.size(); ++c) {
    cores[c].workload = &workloads[c];
    cores[c].result.mode = "scart";
    cores[c].result.objective = config.objective;
  }

  auto close_segment = [&](McCore& core) {
    SimStats now = core.sim->snapshot();
    Segment s;
    s.delta = now.diff_since(core.seg_start);
    s.unit = core.seg_unit;
    s.instructions = s.delta.instructions;
    const auto& prof = config.retention_set[core.seg_unit];
    s.latency_ns = compute_latency_ns(s.delta, prof, config.sim.timing);
    s.energy_nj = compute_energy(s.delta, prof, config.sim.timing).total_nj;
    core.seg_start = now;
    return s;
  };

  bool active = true;
  while (active) {
    active = false;
    for (auto& core : cores) {
      if (core.done()) continue;
      active = true;
      const auto& phase = core.workload->phases[core.phase];

      if (core.event == 0) {
        core.sim = std::make_unique<CoreSim>(sim, config.retention_set, base,
                                             shared_l2);
        core.mode = McCore::Mode::window;
        core.segments.clear();
        core.moves.clear();
        core.seg_start = SimStats{};
        core.seg_unit = base;
        core.predicted = -1;
        core.reverted = false;
        core.prediction_charged = false;
        core.final_unit = base;
        if (phase.events.empty()) {
          core.result.phases.push_back(finalize_phase(
              config, phase.phase_id, phase.weight, {}, -1,
              static_cast<int>(base), false, {}, false));
          ++core.phase;
          continue;
        }
      }

      core.sim->step(phase.events[core.event++]);
      bool phase_done = core.event >= phase.events.size();

      if (core.mode == McCore::Mode::window &&
          core.sim->instructions() >= config.profiling_window_instr) {
        core.window_seg = close_segment(core);
        core.segments.push_back(core.window_seg);
        if (!phase_done) {
          std::vector<double> features = extract(core.window_seg.delta, catalog);
          core.predicted = model.predict(features);
          core.prediction_charged = true;
          if (core.predicted != static_cast<int>(base)) {
            core.moves.emplace_back(base, core.predicted);
            core.sim->switch_unit(core.predicted);
            core.seg_unit = core.predicted;
            core.final_unit = core.predicted;
            core.mode = McCore::Mode::feedback;
          } else {
            core.mode = McCore::Mode::settled;
          }
        }
      } else if (core.mode == McCore::Mode::feedback &&
                 core.sim->instructions() - core.window_seg.instructions >=
                     config.feedback_window_instr) {
        Segment feedback = close_segment(core);
        core.segments.push_back(feedback);
        if (!phase_done) {
          double base_rate = core.window_seg.rate(config.objective);
          double pred_rate = feedback.rate(config.objective);
          if (pred_rate > base_rate * (1.0 + config.feedback_epsilon)) {
            core.reverted = true;
            core.moves.emplace_back(core.seg_unit, base);
            core.sim->switch_unit(base);
            core.seg_unit = base;
            core.final_unit = base;
          }
        }
        core.mode = McCore::Mode::settled;
      }

      if (phase_done) {
        core.sim->finish();
        core.segments.push_back(close_segment(core));
        PhaseDecision d = finalize_phase(
            config, phase.phase_id, phase.weight, core.segments, core.predicted,
            static_cast<int>(core.final_unit), core.reverted, core.moves,
            core.prediction_charged);
        if (core.prediction_charged)
          core.result.prediction_overhead_ns += config.prediction_cost_ns;
        core.result.phases.push_back(std::move(d));
        ++core.phase;
        core.event = 0;
      }
    }
  }

  std::vector<PolicyResult> results;
  results.reserve(cores.size());
  for (auto& core : cores) {
    fold_result_totals(core.result, config);
    results.push_back(std::move(core.result));
  }
  return results;
}

SavingsReport savings_report(std::span<const PolicyResult> results,
                             std::span<const PolicyResult> baseline) {
  if (results.size() != baseline.size() || results.empty())
    fail(ErrorKind::schema, "savings report needs matching workload sets");
  SavingsReport report;
  report.objective = results[0].objective;
  double log_sum = 0;
  for (size_t i = 0; i < results.size(); ++i) {
    if (results[i].workload_id != baseline[i].workload_id)
      fail(ErrorKind::schema, "workload mismatch: '" + results[i].workload_id +
                                  "' vs '" + baseline[i].workload_id + "'");
    if (results[i].objective != report.objective ||
        baseline[i].objective != report.objective)
      fail(ErrorKind::schema, "objective mismatch between result files");
    double base = baseline[i].objective_total;
    double pol = results[i].objective_total;
    if (!(base > 0))
      fail(ErrorKind::schema, "baseline objective must be positive");
    SavingsRow row;
    row.workload_id = results[i].workload_id;
    row.baseline = base;
    row.policy = pol;
    row.savings_fraction = (base - pol) / base;
    log_sum += std::log(pol / base);
    report.rows.push_back(std::move(row));
  }
  report.geomean_ratio = std::exp(log_sum / static_cast<double>(results.size()));
  report.aggregate_savings_fraction = 1.0 - report.geomean_ratio;
  return report;
}

std::vector<DatasetRow> build_dataset(
    std::span<const std::pair<std::string, Workload>> corpus,
    const PolicyConfig& config, const FeatureCatalog& catalog, unsigned jobs) {
  config.validate();
  std::vector<std::vector<DatasetRow>> per_workload(corpus.size());
  parallel_for(corpus.size(), jobs, [&](size_t wi) {
    const auto& [id, workload] = corpus[wi];
    ExhaustiveTable table = label_exhaustive(workload, config, 1);
    std::vector<DatasetRow> rows;
    for (size_t p = 0; p < workload.phases.size(); ++p) {
      const auto& phase = workload.phases[p];
      // Profiling window on the base unit, identical to SCART's first segment
      // (no trailing expiry sweep: the real run continues past the window).
      SimConfig sim = config.sim;
      sim.collect_line_stats = true;
      L2Cache l2(sim.l2);
      std::array<RetentionProfile, 1> units{config.base_profile()};
      CoreSim core(sim, units, 0, l2);
      for (size_t e = 0; e < phase.events.size() &&
                         core.instructions() < config.profiling_window_instr;
           ++e)
        core.step(phase.events[e]);
      SimStats window = core.snapshot();
      if (window.instructions == 0) continue;  // empty phase: nothing to learn

      DatasetRow row;
      row.workload_id = id;
      row.phase_id = phase.phase_id;
      row.weight = phase.weight;
      row.features = extract(window, catalog);
      for (const auto& entry : table.phases[p].per_profile) {
        row.latency_by_profile.push_back(entry.latency_ns);
        row.energy_by_profile.push_back(entry.energy_nj);
      }
      row.best_latency = static_cast<int>(table.phases[p].best_latency);
      row.best_energy = static_cast<int>(table.phases[p].best_energy);
      rows.push_back(std::move(row));
    }
    per_workload[wi] = std::move(rows);
  });
  std::vector<DatasetRow> out;
  for (auto& rows : per_workload)
    for (auto& r : rows) out.push_back(std::move(r));
  return out;
}

std::vector<LabeledSample> dataset_to_samples(std::span<const DatasetRow> rows,
                                              Objective objective) {
  std::vector<LabeledSample> samples;
  samples.reserve(rows.size());
  for (const auto& r : rows) {
    LabeledSample s;
    s.features = r.features;
    s.label = objective == Objective::latency ? r.best_latency : r.best_energy;
    s.objective = objective;
    s.workload_id = r.workload_id;
    s.phase_id = r.phase_id;
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace retlab
