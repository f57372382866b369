// retention-lab: trace-driven STT-RAM cache retention toolkit.
//
// Workflow: gen -> simulate/label -> train/xval/select-features -> policy ->
// compare. All commands are deterministic given --seed; wall-clock timing
// fields are isolated in a "timing" section of the affected reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retlab/config.hpp"
#include "retlab/corpus.hpp"
#include "retlab/error.hpp"
#include "retlab/report.hpp"
#include "retlab/version.hpp"

namespace fs = std::filesystem;
using namespace retlab;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::parse: return 4;
    case ErrorKind::schema: return 5;
    case ErrorKind::catalog_mismatch: return 6;
    case ErrorKind::config: return 7;
  }
  return 1;
}

constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  2  bad command line\n"
    "  3  missing or unreadable file\n"
    "  4  malformed content (trace/config/dataset/model)\n"
    "  5  schema violation\n"
    "  6  feature catalog version mismatch\n"
    "  7  invalid configuration\n";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write: " + path);
  out << content;
}

std::string stem_of(const std::string& path) {
  return fs::path(path).stem().string();
}

struct ManifestEntry {
  std::string id;
  std::vector<std::string> paths;
};

// Manifest: one row per workload, "<id> <trace> [<trace> ...]"; '#' comments.
std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  fs::path dir = fs::path(path).parent_path();
  while (std::getline(in, line)) {
    auto sv = trim(line);
    if (sv.empty() || sv[0] == '#') continue;
    auto toks = split_ws(sv);
    if (toks.size() < 2)
      fail(ErrorKind::parse, "manifest row needs '<id> <trace>...': " + line);
    ManifestEntry e;
    e.id = std::string(toks[0]);
    for (size_t i = 1; i < toks.size(); ++i) {
      fs::path p{std::string(toks[i])};
      if (p.is_relative() && !dir.empty()) p = dir / p;
      e.paths.push_back(p.string());
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) fail(ErrorKind::schema, "manifest is empty: " + path);
  return out;
}

struct GlobalOpts {
  std::string config_path;
  int64_t seed = -1;
  unsigned jobs = 2;

  ExperimentConfig load() const {
    ExperimentConfig c = config_path.empty() ? default_experiment_config()
                                             : parse_config_file(config_path);
    if (seed >= 0) c.seed = static_cast<uint64_t>(seed);
    c.validate();
    return c;
  }
};

std::vector<std::pair<std::string, Workload>> load_corpus(
    const std::vector<std::string>& traces, const std::string& manifest) {
  std::vector<std::pair<std::string, Workload>> corpus;
  for (const auto& t : traces)
    corpus.emplace_back(stem_of(t), parse_trace_file(t));
  if (!manifest.empty()) {
    for (const auto& e : read_manifest(manifest)) {
      if (e.paths.size() != 1)
        fail(ErrorKind::schema,
             "label/policy manifests need exactly one trace per row; "
             "multi-core rows belong to 'policy --mode scart --multi'");
      corpus.emplace_back(e.id, parse_trace_file(e.paths[0]));
    }
  }
  if (corpus.empty())
    fail(ErrorKind::usage, "no input traces (use --trace or --manifest)");
  return corpus;
}

std::vector<std::string> profile_names(const PolicyConfig& pc) {
  std::vector<std::string> names;
  for (const auto& p : pc.retention_set) names.push_back(p.name);
  return names;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " - STT-RAM cache retention simulation and prediction"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  GlobalOpts global;
  app.add_option("--config", global.config_path, "experiment config (INI)");
  app.add_option("--seed", global.seed, "seed override")
      ->envname("RETENTION_LAB_SEED");
  app.add_option("--jobs", global.jobs, "worker threads for fan-out stages")
      ->default_val(2);

  // ---- gen ----------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate synthetic traces");
  SyntheticParams gp;
  std::string gen_out, gen_preset, gen_outdir = ".";
  std::string gen_gap = "10us";
  gen->add_option("--out", gen_out, "output trace path");
  gen->add_option("--preset", gen_preset, "named corpus preset: study");
  gen->add_option("--outdir", gen_outdir, "output directory for presets");
  gen->add_option("--working-set", gp.working_set_lines, "hot line cap");
  gen->add_option("--write-fraction", gp.write_fraction, "fraction of writes");
  gen->add_option("--reuse-gap", gen_gap, "mean per-line write gap (ns/us/ms)");
  gen->add_option("--streaming-fraction", gp.streaming_fraction,
                  "fraction of never-reused lines");
  gen->add_option("--events", gp.event_count, "number of memory events");
  gen->add_option("--instr-per-event", gp.instr_per_event_mean,
                  "mean instructions per event");

  // ---- simulate -----------------------------------------------------------
  auto* simc = app.add_subcommand("simulate", "run one trace on one profile");
  std::string sim_trace, sim_profile = "stt_1ms", sim_out;
  simc->add_option("--trace", sim_trace, "trace file")->required();
  simc->add_option("--profile", sim_profile, "profile name");
  simc->add_option("--out", sim_out, "stats JSON (default: stdout)");

  // ---- label --------------------------------------------------------------
  auto* label = app.add_subcommand(
      "label", "profile + exhaustively label a corpus into a dataset");
  std::vector<std::string> label_traces;
  std::string label_manifest, label_out;
  label->add_option("--trace", label_traces, "trace files");
  label->add_option("--manifest", label_manifest, "corpus manifest");
  label->add_option("--out", label_out, "dataset CSV")->required();

  // ---- train --------------------------------------------------------------
  auto* trainc = app.add_subcommand("train", "train the KNN model");
  std::string train_dataset, train_out, train_features, train_objective = "latency";
  trainc->add_option("--dataset", train_dataset, "dataset CSV")->required();
  trainc->add_option("--objective", train_objective, "latency|energy");
  trainc->add_option("--features", train_features,
                     "selected-features file (default: full catalog)");
  trainc->add_option("--out", train_out, "model file")->required();

  // ---- xval ---------------------------------------------------------------
  auto* xval = app.add_subcommand("xval", "cross-validate on a dataset");
  std::string xval_dataset, xval_out, xval_objective = "latency", xval_features;
  int xval_folds = 0;
  xval->add_option("--dataset", xval_dataset, "dataset CSV")->required();
  xval->add_option("--objective", xval_objective, "latency|energy");
  xval->add_option("--folds", xval_folds, "folds (default from config)");
  xval->add_option("--features", xval_features, "selected-features file");
  xval->add_option("--out", xval_out, "report JSON (default: stdout)");

  // ---- select-features ------------------------------------------------------
  auto* self = app.add_subcommand(
      "select-features", "iterative feature elimination curve + selection");
  std::string self_dataset, self_objective = "latency", self_curve, self_out;
  self->add_option("--dataset", self_dataset, "dataset CSV")->required();
  self->add_option("--objective", self_objective, "latency|energy");
  self->add_option("--out-curve", self_curve, "curve CSV")->required();
  self->add_option("--out", self_out, "selected-features file")->required();

  // ---- policy ---------------------------------------------------------------
  auto* policy = app.add_subcommand("policy", "run a retention policy");
  std::vector<std::string> policy_traces;
  std::string policy_mode = "static", policy_model, policy_profile,
              policy_manifest, policy_outdir = ".", policy_objective;
  bool policy_multi = false;
  policy->add_option("--trace", policy_traces, "trace files");
  policy->add_option("--mode", policy_mode, "static|exhaustive|lars|scart")
      ->check(CLI::IsMember({"static", "exhaustive", "lars", "scart"}));
  policy->add_option("--model", policy_model, "model file (scart)");
  policy->add_option("--profile", policy_profile,
                     "profile name (static; default: base)");
  policy->add_option("--objective", policy_objective,
                     "latency|energy (default from config)");
  policy->add_flag("--multi", policy_multi,
                   "multi-programmed mode; --manifest rows are '<id> <t1>..<tN>'");
  policy->add_option("--manifest", policy_manifest, "workload manifest");
  policy->add_option("--outdir", policy_outdir, "directory for result JSONs");

  // ---- compare ----------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "savings vs a baseline");
  std::vector<std::string> cmp_base, cmp_policy;
  std::string cmp_out;
  compare->add_option("--baseline", cmp_base, "baseline result JSONs")
      ->required();
  compare->add_option("--policy", cmp_policy, "policy result JSONs")->required();
  compare->add_option("--out", cmp_out, "savings CSV (default: stdout)");

  // ---- config -----------------------------------------------------------------
  auto* configc = app.add_subcommand("config", "configuration utilities");
  auto* config_dump = configc->add_subcommand("dump", "print canonical INI");
  configc->require_subcommand(1);

  // global options (--seed, --config, --jobs) may follow the subcommand name
  for (CLI::App* sc : app.get_subcommands(nullptr)) {
    sc->fallthrough();
    for (CLI::App* sub : sc->get_subcommands(nullptr)) sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // --help/--version exit cleanly
  }

  try {
    ExperimentConfig cfg = global.load();
    PolicyConfig pc = cfg.policy();

    if (*gen) {
      if (!gen_preset.empty()) {
        if (gen_preset != "study")
          fail(ErrorKind::usage, "unknown preset '" + gen_preset + "'");
        fs::create_directories(gen_outdir);
        auto corpus = make_study_corpus(cfg.seed);
        std::ostringstream manifest;
        for (const auto& [id, workload] : corpus) {
          std::string path = gen_outdir + "/" + id + ".trace";
          write_trace_file(workload, path);
          manifest << id << ' ' << id + ".trace" << '\n';
        }
        write_file(gen_outdir + "/study.manifest", manifest.str());
        std::cout << "wrote " << corpus.size() << " traces + study.manifest to "
                  << gen_outdir << "\n";
      } else {
        if (gen_out.empty())
          fail(ErrorKind::usage, "gen needs --out or --preset");
        gp.seed = cfg.seed;
        gp.reuse_gap_mean_ns = [&] {
          // reuse the config duration parser via a tiny INI fragment
          std::istringstream ini("[policy]\nmigration_cost = " + gen_gap + "\n");
          return parse_config(ini).migration_cost_ns;
        }();
        write_trace_file(generate_synthetic(gp), gen_out);
      }
      return 0;
    }

    if (*simc) {
      std::string raw = read_file(sim_trace);
      std::istringstream in(raw);
      std::vector<std::string> warnings;
      Workload w = parse_trace(in, &warnings);
      for (const auto& warning : warnings)
        std::cerr << "warning: " << warning << '\n';
      const RetentionProfile& profile = cfg.profile_by_name(sim_profile);
      if (profile.device == DeviceKind::sttram && !profile.volatile_cell())
        fail(ErrorKind::config, "STT-RAM profile with infinite retention");
      SimResult r = simulate(w, cfg.sim(), profile);
      std::string json = stats_to_json(r, profile, cfg.timing, cfg.monitor,
                                       stem_of(sim_trace), fnv1a64_hex(raw));
      if (sim_out.empty())
        std::cout << json;
      else
        write_file(sim_out, json);
      return 0;
    }

    if (*label) {
      auto corpus = load_corpus(label_traces, label_manifest);
      auto rows = build_dataset(corpus, pc, default_catalog(), global.jobs);
      write_dataset_file(rows, default_catalog(), profile_names(pc), label_out);
      std::cout << "wrote " << rows.size() << " rows to " << label_out << "\n";
      return 0;
    }

    auto load_features = [&](const std::string& path) -> std::vector<size_t> {
      if (path.empty()) {
        std::vector<size_t> all(default_catalog().size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
      }
      std::ifstream in(path);
      if (!in) fail(ErrorKind::io, "cannot open features file: " + path);
      return read_selected_features(in, default_catalog());
    };

    if (*trainc) {
      auto rows = read_dataset_file(train_dataset, default_catalog(),
                                    pc.retention_set.size());
      Objective obj = objective_from_name(train_objective);
      auto samples = dataset_to_samples(rows, obj);
      KnnModel model =
          train(samples, cfg.k, load_features(train_features),
                default_catalog().version, static_cast<int>(pc.retention_set.size()));
      save_model_file(model, train_out);
      std::cout << "trained on " << samples.size() << " samples -> " << train_out
                << "\n";
      return 0;
    }

    if (*xval) {
      auto rows = read_dataset_file(xval_dataset, default_catalog(),
                                    pc.retention_set.size());
      Objective obj = objective_from_name(xval_objective);
      auto samples = dataset_to_samples(rows, obj);
      int folds = xval_folds > 0 ? xval_folds : cfg.folds;
      EvalReport report =
          cross_validate(samples, folds, cfg.seed, cfg.k,
                         load_features(xval_features), default_catalog().version,
                         static_cast<int>(pc.retention_set.size()));
      std::string json = eval_report_to_json(report, objective_name(obj));
      if (xval_out.empty())
        std::cout << json;
      else
        write_file(xval_out, json);
      return 0;
    }

    if (*self) {
      auto rows = read_dataset_file(self_dataset, default_catalog(),
                                    pc.retention_set.size());
      Objective obj = objective_from_name(self_objective);
      auto samples = dataset_to_samples(rows, obj);
      EliminationResult r = iterative_elimination(
          samples, cfg.k, cfg.folds, cfg.seed, default_catalog().version,
          static_cast<int>(pc.retention_set.size()));
      write_file(self_curve, elimination_curve_csv(r, default_catalog()));
      std::ostringstream sel;
      write_selected_features(r.selected, default_catalog(), sel);
      write_file(self_out, sel.str());
      std::cout << "selected " << r.selected.size() << " features -> "
                << self_out << "\n";
      return 0;
    }

    if (*policy) {
      Objective obj =
          policy_objective.empty() ? pc.objective : objective_from_name(policy_objective);
      pc.objective = obj;
      fs::create_directories(policy_outdir);
      auto result_path = [&](const std::string& id, const std::string& mode) {
        return policy_outdir + "/" + id + "." + mode + "." +
               objective_name(obj) + ".json";
      };

      if (policy_multi) {
        if (policy_manifest.empty())
          fail(ErrorKind::usage, "--multi needs --manifest");
        KnnModel model = load_model_file(policy_model);
        for (const auto& row : read_manifest(policy_manifest)) {
          std::vector<Workload> workloads;
          std::string hash_input;
          for (const auto& p : row.paths) {
            std::string raw = read_file(p);
            hash_input += raw;
            std::istringstream in(raw);
            workloads.push_back(parse_trace(in));
          }
          auto results = run_multiprogrammed(workloads, model, pc);
          for (size_t core = 0; core < results.size(); ++core) {
            results[core].workload_id =
                row.id + ".core" + std::to_string(core);
            write_file(result_path(results[core].workload_id, "scart"),
                       policy_result_to_json(results[core], pc,
                                             fnv1a64_hex(hash_input)));
          }
        }
        return 0;
      }

      auto corpus_files = [&]() {
        std::vector<std::pair<std::string, std::string>> out;  // id, path
        for (const auto& t : policy_traces) out.emplace_back(stem_of(t), t);
        if (!policy_manifest.empty())
          for (const auto& e : read_manifest(policy_manifest)) {
            if (e.paths.size() != 1)
              fail(ErrorKind::schema,
                   "single-core policy manifest rows need one trace");
            out.emplace_back(e.id, e.paths[0]);
          }
        if (out.empty()) fail(ErrorKind::usage, "policy needs --trace or --manifest");
        return out;
      }();

      KnnModel model;
      if (policy_mode == "scart") model = load_model_file(policy_model);

      for (const auto& [id, path] : corpus_files) {
        std::string raw = read_file(path);
        std::istringstream in(raw);
        Workload w = parse_trace(in);
        std::string hash = fnv1a64_hex(raw);
        if (policy_mode == "exhaustive") {
          ExhaustiveTable t = label_exhaustive(w, pc, global.jobs);
          t.workload_id = id;
          write_file(result_path(id, "exhaustive"),
                     exhaustive_table_to_json(t, pc, hash));
          continue;
        }
        PolicyResult r;
        if (policy_mode == "static") {
          const RetentionProfile& profile =
              policy_profile.empty() ? pc.base_profile()
                                     : cfg.profile_by_name(policy_profile);
          r = run_static(w, pc, profile);
        } else if (policy_mode == "lars") {
          r = run_lars_sampling(w, pc);
        } else {
          r = run_scart(w, model, pc);
        }
        r.workload_id = id;
        write_file(result_path(id, policy_mode),
                   policy_result_to_json(r, pc, hash));
      }
      return 0;
    }

    if (*compare) {
      std::vector<PolicyResult> base, pol;
      for (const auto& p : cmp_base) base.push_back(read_policy_result_file(p));
      for (const auto& p : cmp_policy) pol.push_back(read_policy_result_file(p));
      SavingsReport report = savings_report(pol, base);
      std::string csv = savings_to_csv(report);
      if (cmp_out.empty())
        std::cout << csv;
      else
        write_file(cmp_out, csv);
      return 0;
    }

    if (*config_dump) {
      std::cout << dump_config(cfg);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
