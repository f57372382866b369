// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Everything is seeded; total runtime is a few minutes at most.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "retlab/corpus.hpp"
#include "retlab/energymodel.hpp"
#include "retlab/policy.hpp"

using namespace retlab;
using namespace retlab::testing;

namespace {

struct Criterion {
  int number;
  std::string name;
  std::function<bool(std::string&)> run;
};

bool nearly(double a, double b, double rel_tol) {
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Simulator oracle equivalence (retention off)

bool criterion_lru_equivalence(std::string& detail) {
  uint64_t mismatches = 0;
  uint64_t traces = 0;
  for (uint64_t seed = 1; seed <= 200; ++seed) {
    Rng pick(seed * 77);
    uint32_t sets = 1u << pick.below(4);          // 1..8 sets
    uint32_t ways = 1u << pick.below(3);          // 1..4 ways
    size_t events = 200 + pick.below(1801);       // <= 2000
    uint64_t lines = 8 + pick.below(sets * ways * 6ull);
    Workload w = random_workload(seed, events, lines, 0.4);

    SimConfig cfg;
    cfg.l1 = {uint64_t(sets) * ways * 64, 64, ways};
    std::vector<AccessOutcome> outcomes;
    simulate(w, cfg, sram_profile(), &outcomes);

    RefLruCache ref(sets, ways, 64);
    for (size_t i = 0; i < outcomes.size(); ++i)
      if (outcomes[i].hit != ref.access(w.phases[0].events[i].address))
        ++mismatches;
    ++traces;
  }
  detail = fmt("%llu traces, %llu mismatches",
               (unsigned long long)traces, (unsigned long long)mismatches);
  return mismatches == 0;
}

// ---------------------------------------------------------------------------
// 2. Expiry soundness

bool criterion_expiry_soundness(std::string& detail) {
  // exact threshold pair: T=10us, N=4 -> 7.5us
  L1Cache cache({32 * 1024, 64, 4}, MonitorConfig{}, 10000.0);
  NullLowerLevel lower;
  cache.access(AccessKind::write, 0x40, 0.0, lower);
  bool hit_74 = cache.access(AccessKind::read, 0x40, 7400.0, lower).hit;
  cache.access(AccessKind::write, 0x80, 0.0, lower);
  bool miss_76 = !cache.access(AccessKind::read, 0x80, 7600.0, lower).hit;
  if (!hit_74 || !miss_76) {
    detail = "sharp threshold pair failed";
    return false;
  }

  // property: no hit at age >= threshold across 100 seeded runs
  uint64_t violations = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    SimConfig cfg;
    cfg.l1 = {uint64_t(4) * 2 * 64, 64, 2};
    cfg.monitor.aging_clock = AgingClock::nominal_time;
    Workload w = random_workload(seed * 31, 600, 16, 0.5, 16000);
    std::vector<AccessOutcome> outcomes;
    simulate(w, cfg, stt_retention_set()[0], &outcomes);
    std::map<uint64_t, double> last_write;
    uint64_t instr = 0;
    for (size_t i = 0; i < outcomes.size(); ++i) {
      const auto& e = w.phases[0].events[i];
      instr += e.instr_gap + 1;
      double now = instr * 0.5;
      uint64_t line = e.address / 64;
      if (outcomes[i].hit && now - last_write[line] >= 7500.0) ++violations;
      if (e.kind == AccessKind::write || !outcomes[i].hit)
        last_write[line] = now;
    }
  }
  detail = fmt("7.4us hit / 7.6us miss ok; %llu stale hits in 100 runs",
               (unsigned long long)violations);
  return violations == 0;
}

// ---------------------------------------------------------------------------
// 3. Table II arithmetic

bool criterion_table2(std::string& detail) {
  TimingParams timing;
  auto set = stt_retention_set();

  SimStats writes;
  writes.instructions = 1;
  writes.l1_writes = 1000;
  double dyn = compute_energy(writes, set[0], timing).dynamic_write_nj;

  SimStats idle;
  idle.instructions = 2'000'000;  // exactly 1ms at 2GHz
  EnergyReport stt_idle = compute_energy(idle, set[0], timing);
  EnergyReport sram_idle = compute_energy(idle, sram_profile(), timing);
  double ratio = sram_idle.leakage_nj / stt_idle.leakage_nj;

  bool ok = nearly(dyn, 26.0, 1e-12) && nearly(stt_idle.leakage_nj, 4659.0, 1e-12) &&
            nearly(ratio, 34.265 / 4.659, 1e-12);
  detail = fmt("1000 writes -> %.12g nJ; 1ms leak -> %.12g nJ; ratio %.9g",
               dyn, stt_idle.leakage_nj, ratio);
  return ok;
}

// ---------------------------------------------------------------------------
// 4. Overhead arithmetic

bool criterion_overheads(std::string& detail) {
  PolicyConfig cfg;
  cfg.profiling_window_instr = 20'000;
  cfg.feedback_window_instr = 20'000;
  Workload w = random_workload(5, 4000, 64, 0.5);

  PolicyResult lars = run_lars_sampling(w, cfg);
  double lars_overhead = lars.phases[0].overhead_ns;

  // a model that predicts a non-base unit: exactly one migration + budget
  LabeledSample s;
  s.features.assign(default_catalog().size(), 0.0);
  s.label = 0;
  std::vector<size_t> all(default_catalog().size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  KnnModel model = train({s}, 1, all, default_catalog().version, 6);
  cfg.feedback_epsilon = 1e9;  // ignore degradation; we only count overhead
  PolicyResult scart = run_scart(w, model, cfg);
  double scart_overhead = scart.phases[0].overhead_ns;

  double reduction_pct = 100.0 * (1.0 - scart_overhead / lars_overhead);
  bool ok = lars_overhead == 13824.0 && scart_overhead == 6554.0 &&
            std::abs(reduction_pct - 52.58) <= 0.01;
  detail = fmt("lars %.3fus, scart %.3fus, reduction %.4f%%",
               lars_overhead / 1000.0, scart_overhead / 1000.0, reduction_pct);
  return ok;
}

// ---------------------------------------------------------------------------
// 5. KNN oracle equivalence

bool criterion_knn_oracle(std::string& detail) {
  Rng rng(2024);
  uint64_t instances = 0;
  uint64_t mismatches = 0;
  std::vector<size_t> sel;

  auto check = [&](const std::vector<LabeledSample>& data, int k,
                   const std::vector<double>& query) {
    size_t dim = data[0].features.size();
    sel.resize(dim);
    for (size_t i = 0; i < dim; ++i) sel[i] = i;
    KnnModel m = train(data, k, sel, "acc", 6);
    std::vector<std::vector<double>> std_rows;
    std::vector<int> labels;
    for (const auto& s : data) {
      std_rows.push_back(m.standardizer.apply(s.features));
      labels.push_back(s.label);
    }
    int want = knn_scan_oracle(std_rows, labels, m.standardizer.apply(query), k, 6);
    if (m.predict(query) != want) ++mismatches;
    ++instances;
  };

  for (int trial = 0; trial < 700; ++trial) {
    size_t dim = 1 + rng.below(5);
    size_t rows = 2 + rng.below(50);
    int k = 1 + static_cast<int>(rng.below(std::min<uint64_t>(rows, 9)));
    std::vector<LabeledSample> data;
    for (size_t r = 0; r < rows; ++r) {
      LabeledSample s;
      s.features.resize(dim);
      for (auto& x : s.features) x = static_cast<double>(rng.below(4));
      s.label = static_cast<int>(rng.below(6));
      data.push_back(std::move(s));
    }
    std::vector<double> q(dim);
    for (auto& x : q) x = static_cast<double>(rng.below(4));
    check(data, k, q);
  }

  // deliberate tie constructions
  for (int trial = 0; trial < 300; ++trial) {
    size_t dim = 1 + rng.below(3);
    std::vector<LabeledSample> data;
    std::vector<double> center(dim);
    for (auto& x : center) x = static_cast<double>(rng.below(5));
    // duplicated points with conflicting labels
    for (int dup = 0; dup < 2; ++dup) {
      LabeledSample s;
      s.features = center;
      s.label = static_cast<int>(rng.below(6));
      data.push_back(std::move(s));
    }
    // symmetric pair, equidistant from the center query
    double delta = 1.0 + static_cast<double>(rng.below(3));
    for (int sign : {-1, +1}) {
      LabeledSample s;
      s.features = center;
      s.features[0] += sign * delta;
      s.label = static_cast<int>(rng.below(6));
      data.push_back(std::move(s));
    }
    int k = 1 + static_cast<int>(rng.below(4));
    check(data, k, center);
  }

  detail = fmt("%llu instances, %llu mismatches",
               (unsigned long long)instances, (unsigned long long)mismatches);
  return instances == 1000 && mismatches == 0;
}

// ---------------------------------------------------------------------------
// 6. Learning pipeline properties

bool criterion_learning_properties(std::string& detail) {
  bool ok = true;
  std::string parts;

  // macro-F of a diagonal confusion matrix
  double diag_f = f_score({{4, 0, 0}, {0, 9, 0}, {0, 0, 2}});
  ok &= diag_f == 1.0;
  parts += fmt("diag F=%.3f", diag_f);

  // constant feature permutation importance is exactly zero
  Rng rng(66);
  std::vector<LabeledSample> flat;
  for (int i = 0; i < 50; ++i) {
    LabeledSample s;
    double x = rng.uniform(0, 10);
    s.features = {x, 42.0};
    s.label = x > 5 ? 1 : 0;
    flat.push_back(std::move(s));
  }
  KnnModel fm = train(flat, 3, {0, 1}, "acc", 6);
  auto ranking = permutation_importance(fm, flat, 3, 5);
  double const_imp = 1;
  for (auto& [idx, imp] : ranking)
    if (idx == 1) const_imp = imp;
  ok &= const_imp == 0.0;
  parts += fmt(", const importance=%g", const_imp);

  // separable dataset: 5-fold CV F-score = 1.0
  std::vector<LabeledSample> sep;
  for (int c = 0; c < 6; ++c)
    for (int i = 0; i < 10; ++i) {
      LabeledSample s;
      s.features = {10.0 * c + rng.uniform(-1, 1), 5.0 * c + rng.uniform(-0.5, 0.5)};
      s.label = c;
      sep.push_back(std::move(s));
    }
  EvalReport cv = cross_validate(sep, 5, 9, 3, {0, 1}, "acc", 6);
  ok &= cv.f_score == 1.0;
  parts += fmt(", separable CV F=%.3f", cv.f_score);

  // elimination keeps exactly the one informative feature
  std::vector<LabeledSample> one;
  for (int i = 0; i < 72; ++i) {
    LabeledSample s;
    double x = rng.uniform(0, 12);
    int label = std::min(5, static_cast<int>(x / 2.0));
    s.features = {rng.uniform(0, 1), x, rng.uniform(0, 1), rng.uniform(0, 1)};
    s.label = label;
    one.push_back(std::move(s));
  }
  EliminationResult er = iterative_elimination(one, 3, 5, 13, "acc", 6);
  ok &= er.selected.size() == 1 && er.selected[0] == 1 &&
        er.curve.size() == one[0].features.size();
  parts += fmt(", elimination -> %zu feature(s)", er.selected.size());

  detail = parts;
  return ok;
}

// ---------------------------------------------------------------------------
// 7. End-to-end oracle study

bool criterion_study(std::string& detail) {
  auto corpus = make_study_corpus(7);
  PolicyConfig cfg;
  auto rows = build_dataset(corpus, cfg, default_catalog(), 2);
  if (rows.size() != corpus.size()) {
    detail = "dataset row count mismatch";
    return false;
  }

  // the corpus contains at least one workload whose energy- and latency-best
  // retention indices differ
  bool divergence = false;
  std::set<int> latency_labels;
  for (const auto& r : rows) {
    latency_labels.insert(r.best_latency);
    if (r.best_latency != r.best_energy) divergence = true;
  }
  if (!divergence) {
    detail = "no workload with diverging latency/energy labels";
    return false;
  }

  // seeded 70/30 split
  Rng split_rng(404);
  std::vector<size_t> idx(rows.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[split_rng.below(i)]);
  size_t n_train = rows.size() * 7 / 10;

  std::string parts;
  bool ok = true;
  double scart_latency_log_ratio = 0;
  size_t test_count = idx.size() - n_train;

  for (Objective obj : {Objective::latency, Objective::energy}) {
    PolicyConfig ocfg;
    ocfg.objective = obj;
    std::vector<LabeledSample> train_set;
    for (size_t i = 0; i < n_train; ++i) {
      const auto& r = rows[idx[i]];
      LabeledSample s;
      s.features = r.features;
      s.label = obj == Objective::latency ? r.best_latency : r.best_energy;
      s.objective = obj;
      train_set.push_back(std::move(s));
    }
    std::vector<size_t> all(default_catalog().size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    KnnModel model = train(train_set, 3, all, default_catalog().version, 6);

    size_t within = 0;
    for (size_t i = n_train; i < idx.size(); ++i) {
      const auto& r = rows[idx[i]];
      const auto& workload = corpus[idx[i]].second;
      PolicyResult scart = run_scart(workload, model, ocfg);
      double best = obj == Objective::latency
                        ? r.latency_by_profile[r.best_latency]
                        : r.energy_by_profile[r.best_energy];
      if (scart.objective_total <= 1.05 * best) ++within;
      if (obj == Objective::latency) {
        PolicyResult base = run_static(workload, ocfg, ocfg.base_profile());
        scart_latency_log_ratio +=
            std::log(scart.objective_total / base.objective_total);
      }
    }
    double frac = double(within) / double(test_count);
    parts += fmt("%s: %zu/%zu within 5%%; ", objective_name(obj), within,
                 test_count);
    ok &= frac >= 0.80;
  }

  double geomean_savings =
      1.0 - std::exp(scart_latency_log_ratio / double(test_count));
  parts += fmt("latency geomean savings vs base %.2f%%", 100.0 * geomean_savings);
  ok &= geomean_savings > 0.0;
  parts += fmt("; %zu latency classes", latency_labels.size());
  detail = parts;
  return ok;
}

// ---------------------------------------------------------------------------
// 8. Feedback safety bound

bool criterion_feedback_bound(std::string& detail) {
  Workload w;
  w.phases.push_back({"p0", 1.0, {}});
  for (int i = 0; i < 12000; ++i)
    w.phases[0].events.push_back({300, AccessKind::write, uint64_t(i % 64) * 64, 0});

  PolicyConfig cfg;
  LabeledSample s;
  s.features.assign(default_catalog().size(), 0.0);
  s.label = 0;  // always predict 10us on a workload that needs 1ms
  std::vector<size_t> all(default_catalog().size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  KnnModel model = train({s}, 1, all, default_catalog().version, 6);

  PolicyResult scart = run_scart(w, model, cfg);
  PolicyResult base = run_static(w, cfg, cfg.base_profile());
  if (scart.reverts != 1 || scart.migrations != 2) {
    detail = fmt("expected a revert (reverts=%d migrations=%d)", scart.reverts,
                 scart.migrations);
    return false;
  }
  const PhaseDecision& d = scart.phases[0];
  double detour = (d.objective_value - d.overhead_ns) - base.objective_total;
  double refill_allowance = 64.0 *
                            (cfg.sim.timing.l2_hit_penalty_cycles +
                             cfg.sim.timing.memory_penalty_cycles) *
                            cfg.sim.timing.ns_per_cycle();
  double bound = cfg.prediction_cost_ns + 2 * cfg.migration_cost_ns + detour +
                 refill_allowance;
  bool ok = scart.objective_total <= base.objective_total + bound;
  detail = fmt("scart %.0fns vs base %.0fns, detour %.0fns, bound %.0fns",
               scart.objective_total, base.objective_total, detour, bound);
  return ok;
}

// ---------------------------------------------------------------------------
// 9. Multi-programmed contention

bool criterion_multiprogrammed(std::string& detail) {
  PolicyConfig cfg;
  cfg.profiling_window_instr = 5'000;
  cfg.feedback_window_instr = 5'000;
  LabeledSample s;
  s.features.assign(default_catalog().size(), 0.0);
  s.label = static_cast<int>(cfg.base_index);
  std::vector<size_t> all(default_catalog().size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  KnnModel model = train({s}, 1, all, default_catalog().version, 6);

  // conflict fixture: both cores' lines land in one L2 set
  auto conflict = [](uint64_t first_line) {
    Workload w;
    w.phases.push_back({"p0", 1.0, {}});
    for (int i = 0; i < 3000; ++i)
      w.phases[0].events.push_back(
          {4, AccessKind::read, (first_line + (i % 10)) * 65536, 0});
    return w;
  };
  Workload w0 = conflict(0);
  Workload w1 = conflict(10);
  auto alone = run_multiprogrammed(std::vector<Workload>{w0}, model, cfg);
  auto both = run_multiprogrammed(std::vector<Workload>{w0, w1}, model, cfg);
  auto rate = [](const PolicyResult& r) {
    const SimStats& st = r.phases[0].stats;
    return double(st.l2_misses) / double(st.l2_accesses);
  };
  bool contention = rate(both[0]) > rate(alone[0]) && rate(both[1]) > rate(alone[0]);

  // symmetry fixture: four identical traces -> identical per-core L1 stats
  SyntheticParams p;
  p.event_count = 3000;
  p.reuse_gap_mean_ns = 4000;
  p.instr_per_event_mean = 8;
  p.seed = 12;
  Workload w = generate_synthetic(p);
  auto four = run_multiprogrammed(std::vector<Workload>{w, w, w, w}, model, cfg);
  bool symmetric = true;
  for (size_t c = 1; c < 4; ++c) {
    const SimStats& a = four[0].phases[0].stats;
    const SimStats& b = four[c].phases[0].stats;
    symmetric &= a.l1_reads == b.l1_reads && a.l1_writes == b.l1_writes &&
                 a.l1_read_misses == b.l1_read_misses &&
                 a.l1_write_misses == b.l1_write_misses &&
                 a.l1_writebacks == b.l1_writebacks &&
                 a.expiry_evictions == b.expiry_evictions;
  }
  detail = fmt("isolated L2 miss rate %.4f, shared %.4f/%.4f; symmetry %s",
               rate(alone[0]), rate(both[0]), rate(both[1]),
               symmetric ? "ok" : "BROKEN");
  return contention && symmetric;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "simulator oracle equivalence (200 traces, retention off)",
       criterion_lru_equivalence},
      {2, "expiry soundness ((N-1)/N threshold, 7.4/7.6us pair)",
       criterion_expiry_soundness},
      {3, "Table II energy arithmetic", criterion_table2},
      {4, "LARS/SCART overhead arithmetic (13.824us, 52.58%)",
       criterion_overheads},
      {5, "KNN oracle equivalence (1000 instances incl. ties)",
       criterion_knn_oracle},
      {6, "learning pipeline properties", criterion_learning_properties},
      {7, "end-to-end oracle study (SCART vs exhaustive, 5%/80%)",
       criterion_study},
      {8, "feedback safety bound under an adversarial model",
       criterion_feedback_bound},
      {9, "multi-programmed contention and symmetry", criterion_multiprogrammed},
  };

  int failures = 0;
  for (auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    std::printf("[%s] criterion %d: %s (%s) [%.1fs]\n", ok ? "PASS" : "FAIL",
                c.number, c.name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) {
    std::printf("%d criterion(s) FAILED\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
