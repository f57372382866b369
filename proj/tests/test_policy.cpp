#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "retlab/error.hpp"
#include "retlab/policy.hpp"

using namespace retlab;
using namespace retlab::testing;

namespace {

PolicyConfig test_config(Objective objective = Objective::latency) {
  PolicyConfig cfg;
  cfg.objective = objective;
  cfg.profiling_window_instr = 200'000;
  cfg.feedback_window_instr = 200'000;
  return cfg;
}

// Always predicts one label, regardless of the query.
KnnModel constant_model(int label, Objective objective) {
  LabeledSample s;
  s.features.assign(default_catalog().size(), 0.0);
  s.label = label;
  s.objective = objective;
  std::vector<size_t> all(default_catalog().size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;
  return train({s}, 1, all, default_catalog().version, 6);
}

// `lines` cache lines written round-robin, one store every `gap_instr`
// instructions; per-line rewrite interval is lines * (gap_instr + 1) * 0.5ns.
Workload striding_writes(uint64_t lines, uint64_t gap_instr, size_t events) {
  Workload w;
  w.phases.push_back({"p0", 1.0, {}});
  for (size_t i = 0; i < events; ++i)
    w.phases[0].events.push_back(
        {gap_instr, AccessKind::write, (i % lines) * 64, 0});
  return w;
}

}  // namespace

TEST_CASE("select_best takes the argmin and breaks ties low") {
  std::vector<double> v = {3.0, 1.5, 1.5, 2.0};
  CHECK(select_best(v) == 1);
  // invariant under positive rescaling of the objective
  std::vector<double> scaled;
  for (double x : v) scaled.push_back(x * 37.5);
  CHECK(select_best(scaled) == 1);
}

TEST_CASE("exhaustive labeling: 30us write-reuse gaps need at least 50us") {
  // 16 lines rewritten every 16 * 3750 instructions = 30us exactly.
  Workload w = striding_writes(16, 3749, 4000);
  PolicyConfig cfg = test_config();
  ExhaustiveTable t = label_exhaustive(w, cfg);
  REQUIRE(t.phases.size() == 1);
  CHECK(t.phases[0].best_latency >= 2);  // 10us and 26.5us force expiry misses
  CHECK(t.phases[0].best_energy >= 2);

  // internal consistency: the chosen profile achieves its row minimum
  for (Objective o : {Objective::latency, Objective::energy}) {
    size_t best = t.phases[0].best(o);
    for (const auto& e : t.phases[0].per_profile)
      CHECK(t.phases[0].per_profile[best].value(o) <= e.value(o));
  }
}

TEST_CASE("a profile dominated in both metrics is never selected") {
  Workload w = striding_writes(16, 3749, 3000);
  PolicyConfig cfg = test_config();
  ExhaustiveTable t = label_exhaustive(w, cfg);
  for (const auto& phase : t.phases) {
    for (size_t i = 0; i < phase.per_profile.size(); ++i) {
      bool dominated = false;
      for (size_t j = 0; j < phase.per_profile.size(); ++j)
        if (phase.per_profile[j].latency_ns < phase.per_profile[i].latency_ns &&
            phase.per_profile[j].energy_nj < phase.per_profile[i].energy_nj)
          dominated = true;
      if (dominated) {
        CHECK(phase.best_latency != i);
        CHECK(phase.best_energy != i);
      }
    }
  }
}

TEST_CASE("run_static equals the simulate+energy composition") {
  Workload w = random_workload(17, 3000, 256, 0.4);
  PolicyConfig cfg = test_config();
  const RetentionProfile& base = cfg.base_profile();
  PolicyResult r = run_static(w, cfg, base);
  CHECK(r.migrations == 0);
  CHECK(r.overhead_ns == 0.0);

  SimConfig sim = cfg.sim;
  sim.collect_line_stats = false;
  SimResult ref = simulate(w, sim, base);
  double lat = 0, en = 0;
  for (const auto& p : ref.phases) {
    lat += p.weight * compute_latency_ns(p.stats, base, sim.timing);
    en += p.weight * compute_energy(p.stats, base, sim.timing).total_nj;
  }
  CHECK(r.latency_total_ns == lat);
  CHECK(r.energy_total_nj == en);
}

TEST_CASE("run_static rejects infinite retention with STT-RAM constants") {
  Workload w = striding_writes(4, 10, 50);
  PolicyConfig cfg = test_config();
  RetentionProfile bad = cfg.retention_set[0];
  bad.retention_time_ns = kInfiniteRetention;  // still DeviceKind::sttram
  CHECK_THROWS_AS(run_static(w, cfg, bad), Error);
  // the SRAM profile with infinite retention is fine
  CHECK_NOTHROW(run_static(w, cfg, sram_profile()));
}

TEST_CASE("scart with an always-base model is static plus prediction overhead") {
  Workload w = random_workload(23, 4000, 128, 0.5);
  for (Objective o : {Objective::latency, Objective::energy}) {
    PolicyConfig cfg = test_config(o);
    cfg.profiling_window_instr = 10'000;
    cfg.feedback_window_instr = 10'000;
    KnnModel model = constant_model(static_cast<int>(cfg.base_index), o);
    PolicyResult scart = run_scart(w, model, cfg);
    PolicyResult base = run_static(w, cfg, cfg.base_profile());
    CHECK(scart.migrations == 0);
    CHECK(scart.reverts == 0);
    CHECK(scart.prediction_overhead_ns == cfg.prediction_cost_ns);
    if (o == Objective::latency) {
      CHECK(scart.objective_total ==
            doctest::Approx(base.objective_total + cfg.prediction_cost_ns)
                .epsilon(1e-12));
    } else {
      double pred_energy =
          cfg.prediction_cost_ns * cfg.base_profile().leakage_mw * 1e-3;
      CHECK(scart.objective_total ==
            doctest::Approx(base.objective_total + pred_energy).epsilon(1e-12));
    }
  }
}

TEST_CASE("a prediction that degrades the objective reverts to base") {
  // Per-line rewrite interval 64 * 301 * 0.5ns = 9.6us: comfortably inside
  // the base retention, hopeless for the 10us unit (threshold 7.5us), and
  // dense enough that expiry misses dominate the feedback window.
  Workload w = striding_writes(64, 300, 12000);
  PolicyConfig cfg = test_config();
  cfg.profiling_window_instr = 1'000'000;
  cfg.feedback_window_instr = 1'000'000;
  KnnModel model = constant_model(0, cfg.objective);  // always 10us
  PolicyResult r = run_scart(w, model, cfg);
  REQUIRE(r.phases.size() == 1);
  CHECK(r.phases[0].predicted_index == 0);
  CHECK(r.reverts == 1);
  CHECK(r.migrations == 2);
  CHECK(r.phases[0].final_index == static_cast<int>(cfg.base_index));
  CHECK(r.overhead_ns ==
        doctest::Approx(2 * cfg.migration_cost_ns + cfg.prediction_cost_ns));
}

TEST_CASE("scart rejects a model built against another catalog") {
  Workload w = striding_writes(4, 10, 100);
  PolicyConfig cfg = test_config();
  KnnModel model = constant_model(0, cfg.objective);
  model.catalog_version = "v0-stale";
  CHECK_THROWS_AS(run_scart(w, model, cfg), Error);
}

TEST_CASE("lars overhead arithmetic") {
  Workload w = random_workload(31, 3000, 128, 0.5);
  PolicyConfig cfg = test_config();

  SUBCASE("six units cost exactly 6 x 2.304us per decision") {
    PolicyResult r = run_lars_sampling(w, cfg);
    REQUIRE(r.phases.size() == 1);
    CHECK(r.phases[0].migrations == 6);
    CHECK(r.phases[0].overhead_ns == 6 * 2304.0);
    CHECK(r.overhead_ns == 13824.0);
  }

  SUBCASE("a single-unit set migrates zero times") {
    cfg.retention_set = {cfg.retention_set[0]};
    cfg.base_index = 0;
    PolicyResult r = run_lars_sampling(w, cfg);
    CHECK(r.migrations == 0);
    CHECK(r.overhead_ns == 0.0);
  }
}

TEST_CASE("lars lands on the exhaustive winner for a stable workload") {
  // Deterministic 30us rewrites: expiry behavior is identical in every
  // sampling window, so the sampled ranking matches the full-phase ranking.
  Workload w = striding_writes(16, 3749, 60000);
  PolicyConfig cfg = test_config();
  ExhaustiveTable t = label_exhaustive(w, cfg);
  PolicyResult r = run_lars_sampling(w, cfg);
  CHECK(r.phases[0].final_index ==
        static_cast<int>(t.phases[0].best_latency));
}

TEST_CASE("savings report definitional cases") {
  auto mk = [](const std::string& id, double total) {
    PolicyResult r;
    r.workload_id = id;
    r.objective = Objective::latency;
    r.objective_total = total;
    return r;
  };

  SUBCASE("identical results mean zero savings") {
    std::vector<PolicyResult> a = {mk("w0", 50.0), mk("w1", 70.0)};
    SavingsReport rep = savings_report(a, a);
    for (const auto& row : rep.rows) CHECK(row.savings_fraction == 0.0);
    CHECK(rep.aggregate_savings_fraction == doctest::Approx(0.0));
  }

  SUBCASE("baseline 100, policy 80 saves 20%") {
    std::vector<PolicyResult> pol = {mk("w0", 80.0)};
    std::vector<PolicyResult> base = {mk("w0", 100.0)};
    SavingsReport rep = savings_report(pol, base);
    CHECK(rep.rows[0].savings_fraction == doctest::Approx(0.20));
  }

  SUBCASE("geomean of ratios 0.8 and 0.5 saves 1 - sqrt(0.4)") {
    std::vector<PolicyResult> pol = {mk("w0", 80.0), mk("w1", 50.0)};
    std::vector<PolicyResult> base = {mk("w0", 100.0), mk("w1", 100.0)};
    SavingsReport rep = savings_report(pol, base);
    CHECK(rep.aggregate_savings_fraction ==
          doctest::Approx(1.0 - std::sqrt(0.4)).epsilon(1e-12));
  }

  SUBCASE("mismatched workload sets are rejected") {
    std::vector<PolicyResult> pol = {mk("w0", 80.0)};
    std::vector<PolicyResult> base = {mk("w1", 100.0)};
    CHECK_THROWS_AS(savings_report(pol, base), Error);
  }
}

TEST_CASE("four identical traces see identical per-core L1 stats") {
  SyntheticParams p;
  p.event_count = 3000;
  p.reuse_gap_mean_ns = 4000;
  p.instr_per_event_mean = 8;
  p.seed = 5;
  Workload w = generate_synthetic(p);
  PolicyConfig cfg = test_config();
  cfg.profiling_window_instr = 10'000;
  cfg.feedback_window_instr = 10'000;
  KnnModel model = constant_model(static_cast<int>(cfg.base_index), cfg.objective);
  std::vector<Workload> four = {w, w, w, w};
  auto results = run_multiprogrammed(four, model, cfg);
  REQUIRE(results.size() == 4);
  const SimStats& ref = results[0].phases[0].stats;
  for (size_t c = 1; c < 4; ++c) {
    const SimStats& s = results[c].phases[0].stats;
    CHECK(s.l1_reads == ref.l1_reads);
    CHECK(s.l1_writes == ref.l1_writes);
    CHECK(s.l1_read_misses == ref.l1_read_misses);
    CHECK(s.l1_write_misses == ref.l1_write_misses);
    CHECK(s.l1_writebacks == ref.l1_writebacks);
    CHECK(s.expiry_evictions == ref.expiry_evictions);
  }
}

TEST_CASE("shared-L2 conflict raises per-core L2 miss rates") {
  // Each core cycles 10 lines that all map to L2 set 0 (stride = sets *
  // line_bytes = 64KB) and to one L1 set, so L1 thrashes and every access
  // reaches the L2. Ten lines fit the 16-way L2 alone; twenty do not.
  auto conflict_trace = [](uint64_t first_line) {
    Workload w;
    w.phases.push_back({"p0", 1.0, {}});
    for (int i = 0; i < 3000; ++i) {
      uint64_t k = first_line + (i % 10);
      w.phases[0].events.push_back({4, AccessKind::read, k * 65536, 0});
    }
    return w;
  };
  PolicyConfig cfg = test_config();
  cfg.profiling_window_instr = 5'000;
  cfg.feedback_window_instr = 5'000;
  KnnModel model = constant_model(static_cast<int>(cfg.base_index), cfg.objective);

  Workload w0 = conflict_trace(0);
  Workload w1 = conflict_trace(10);
  auto alone = run_multiprogrammed(std::vector<Workload>{w0}, model, cfg);
  auto shared = run_multiprogrammed(std::vector<Workload>{w0, w1}, model, cfg);

  auto miss_rate = [](const PolicyResult& r) {
    const SimStats& s = r.phases[0].stats;
    REQUIRE(s.l2_accesses > 0);
    return double(s.l2_misses) / double(s.l2_accesses);
  };
  double isolated_rate = miss_rate(alone[0]);
  CHECK(miss_rate(shared[0]) > isolated_rate);
  CHECK(miss_rate(shared[1]) > isolated_rate);
}

TEST_CASE("feedback bound: adversarial prediction stays near static base") {
  Workload w = striding_writes(64, 300, 12000);
  PolicyConfig cfg = test_config();
  cfg.profiling_window_instr = 1'000'000;
  cfg.feedback_window_instr = 1'000'000;
  KnnModel model = constant_model(0, cfg.objective);
  PolicyResult scart = run_scart(w, model, cfg);
  PolicyResult base = run_static(w, cfg, cfg.base_profile());
  REQUIRE(scart.reverts == 1);

  // bound: prediction + two migrations + the measured feedback-window delta,
  // plus the state-divergence refill allowance (the working set refetched
  // after the window detour).
  double base_rate = base.objective_total / double(w.instruction_count());
  double feedback_delta = 0;
  // reconstruct the feedback segment cost from the phase breakdown
  const PhaseDecision& d = scart.phases[0];
  double scart_segments = d.objective_value - d.overhead_ns;
  double base_segments = base.objective_total;
  double refill_allowance =
      64.0 * (cfg.sim.timing.l2_hit_penalty_cycles +
              cfg.sim.timing.memory_penalty_cycles) *
      cfg.sim.timing.ns_per_cycle();
  feedback_delta = scart_segments - base_segments;  // what the detour cost
  CHECK(scart.objective_total <=
        base.objective_total + cfg.prediction_cost_ns +
            2 * cfg.migration_cost_ns + feedback_delta + refill_allowance);
  // and the detour itself is bounded by one feedback window at the bad rate
  double worst_window = double(cfg.feedback_window_instr) * base_rate * 50.0;
  CHECK(feedback_delta < worst_window);
}
