#include "retlab/learn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "retlab/error.hpp"
#include "retlab/rng.hpp"
#include "retlab/util.hpp"
#include "retlab/version.hpp"

namespace retlab {

const char* objective_name(Objective o) {
  return o == Objective::latency ? "latency" : "energy";
}

Objective objective_from_name(const std::string& name) {
  if (name == "latency") return Objective::latency;
  if (name == "energy") return Objective::energy;
  fail(ErrorKind::parse, "unknown objective '" + name + "'");
}

namespace {

void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
}

struct Neighbor {
  double dist2;
  int label;
  size_t row;

  bool operator<(const Neighbor& o) const {
    if (dist2 != o.dist2) return dist2 < o.dist2;
    if (label != o.label) return label < o.label;
    return row < o.row;
  }
};

int vote(std::vector<Neighbor>& neighbors, int k, int n_classes) {
  std::sort(neighbors.begin(), neighbors.end());
  int kk = std::min<int>(k, static_cast<int>(neighbors.size()));
  std::vector<int> votes(n_classes, 0);
  for (int i = 0; i < kk; ++i) ++votes[neighbors[i].label];
  int best = *std::max_element(votes.begin(), votes.end());
  for (int i = 0; i < kk; ++i)
    if (votes[neighbors[i].label] == best) return neighbors[i].label;
  return neighbors[0].label;  // unreachable
}

}  // namespace

void KnnModel::prepare() {
  train_sel_.clear();
  train_sel_.reserve(train_raw.size());
  for (const auto& row : train_raw) {
    auto std_row = standardizer.apply(row);
    std::vector<double> sel(selected.size());
    for (size_t j = 0; j < selected.size(); ++j) sel[j] = std_row[selected[j]];
    train_sel_.push_back(std::move(sel));
  }
}

int KnnModel::predict(const std::vector<double>& raw_features) const {
  uint64_t ops = 0;
  return predict_counted(raw_features, ops);
}

int KnnModel::predict_counted(const std::vector<double>& raw_features,
                              uint64_t& distance_ops) const {
  if (raw_features.size() != standardizer.mean.size())
    fail(ErrorKind::schema, "feature vector dimension mismatch: got " +
                                std::to_string(raw_features.size()) +
                                ", model expects " +
                                std::to_string(standardizer.mean.size()));
  auto std_row = standardizer.apply(raw_features);
  std::vector<double> q(selected.size());
  for (size_t j = 0; j < selected.size(); ++j) q[j] = std_row[selected[j]];

  std::vector<Neighbor> neighbors;
  neighbors.reserve(train_sel_.size());
  for (size_t r = 0; r < train_sel_.size(); ++r) {
    const auto& row = train_sel_[r];
    double d2 = 0;
    for (size_t j = 0; j < q.size(); ++j) {
      double d = q[j] - row[j];
      d2 += d * d;
    }
    distance_ops += q.size();
    neighbors.push_back({d2, labels[r], r});
  }
  return vote(neighbors, k, n_classes);
}

KnnModel train(const std::vector<LabeledSample>& dataset, int k,
               const std::vector<size_t>& selected_features,
               const std::string& catalog_version, int n_classes) {
  if (dataset.empty()) fail(ErrorKind::schema, "cannot train on an empty dataset");
  if (k < 1) fail(ErrorKind::schema, "k must be >= 1");
  if (static_cast<size_t>(k) > dataset.size())
    fail(ErrorKind::schema, "k (" + std::to_string(k) +
                                ") exceeds dataset size (" +
                                std::to_string(dataset.size()) + ")");
  size_t dim = dataset[0].features.size();
  std::vector<bool> seen(dim, false);
  for (size_t idx : selected_features) {
    if (idx >= dim) fail(ErrorKind::schema, "selected feature index out of range");
    if (seen[idx]) fail(ErrorKind::schema, "duplicate selected feature index");
    seen[idx] = true;
  }
  if (selected_features.empty())
    fail(ErrorKind::schema, "at least one feature must be selected");

  KnnModel m;
  m.k = k;
  m.n_classes = n_classes;
  m.objective = dataset[0].objective;
  m.catalog_version = catalog_version;
  m.selected = selected_features;
  m.train_raw.reserve(dataset.size());
  m.labels.reserve(dataset.size());
  for (const auto& s : dataset) {
    if (s.features.size() != dim)
      fail(ErrorKind::schema, "inconsistent feature dimensions in dataset");
    if (s.label < 0 || s.label >= n_classes)
      fail(ErrorKind::schema, "label out of range");
    m.train_raw.push_back(s.features);
    m.labels.push_back(s.label);
  }
  if (dataset.size() >= 2) {
    m.standardizer = fit_standardizer(m.train_raw);
  } else {
    m.standardizer.mean.assign(dim, 0.0);
    m.standardizer.stddev.assign(dim, 1.0);
  }
  m.prepare();
  return m;
}

double f_score(const std::vector<std::vector<uint64_t>>& confusion) {
  size_t n = confusion.size();
  for (const auto& row : confusion)
    if (row.size() != n) fail(ErrorKind::schema, "confusion matrix must be square");
  if (n == 0) return 0.0;
  double sum = 0;
  for (size_t c = 0; c < n; ++c) {
    uint64_t row_sum = 0, col_sum = 0;
    for (size_t j = 0; j < n; ++j) {
      row_sum += confusion[c][j];
      col_sum += confusion[j][c];
    }
    double tp = static_cast<double>(confusion[c][c]);
    double precision = col_sum ? tp / col_sum : 0.0;
    double recall = row_sum ? tp / row_sum : 0.0;
    if (precision + recall > 0)
      sum += 2 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(n);
}

namespace {

void fill_report_from_confusion(EvalReport& r) {
  size_t n = r.confusion.size();
  r.precision.assign(n, 0.0);
  r.recall.assign(n, 0.0);
  for (size_t c = 0; c < n; ++c) {
    uint64_t row_sum = 0, col_sum = 0;
    for (size_t j = 0; j < n; ++j) {
      row_sum += r.confusion[c][j];
      col_sum += r.confusion[j][c];
    }
    double tp = static_cast<double>(r.confusion[c][c]);
    r.precision[c] = col_sum ? tp / col_sum : 0.0;
    r.recall[c] = row_sum ? tp / row_sum : 0.0;
  }
  r.f_score = f_score(r.confusion);
}

}  // namespace

EvalReport cross_validate(const std::vector<LabeledSample>& dataset, int folds,
                          uint64_t seed, int k,
                          const std::vector<size_t>& selected_features,
                          const std::string& catalog_version, int n_classes) {
  if (folds < 2) fail(ErrorKind::schema, "folds must be >= 2");
  if (static_cast<size_t>(folds) > dataset.size())
    fail(ErrorKind::schema, "folds (" + std::to_string(folds) +
                                ") exceed dataset size (" +
                                std::to_string(dataset.size()) + ")");

  std::vector<size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  shuffle_indices(idx, rng);

  EvalReport report;
  report.seed = seed;
  report.folds = folds;
  report.confusion.assign(n_classes, std::vector<uint64_t>(n_classes, 0));

  size_t n = dataset.size();
  uint64_t total_ops = 0;
  uint64_t queries = 0;
  double total_us = 0;
  size_t start = 0;
  for (int f = 0; f < folds; ++f) {
    size_t len = n / folds + (static_cast<size_t>(f) < n % folds ? 1 : 0);
    size_t end = start + len;
    std::vector<LabeledSample> train_set;
    train_set.reserve(n - len);
    std::vector<size_t> test_idx;
    test_idx.reserve(len);
    for (size_t i = 0; i < n; ++i) {
      if (i >= start && i < end)
        test_idx.push_back(idx[i]);
      else
        train_set.push_back(dataset[idx[i]]);
    }
    KnnModel model = train(train_set, std::min<int>(k, int(train_set.size())),
                           selected_features, catalog_version, n_classes);
    auto t0 = std::chrono::steady_clock::now();
    for (size_t i : test_idx) {
      uint64_t ops = 0;
      int pred = model.predict_counted(dataset[i].features, ops);
      total_ops += ops;
      ++queries;
      ++report.confusion[dataset[i].label][pred];
    }
    auto t1 = std::chrono::steady_clock::now();
    total_us += std::chrono::duration<double, std::micro>(t1 - t0).count();
    start = end;
  }
  report.mean_prediction_time_us = queries ? total_us / queries : 0.0;
  report.mean_distance_ops = queries ? total_ops / queries : 0;
  fill_report_from_confusion(report);
  return report;
}

namespace {

double eval_f(const KnnModel& model,
              const std::vector<std::vector<double>>& features,
              const std::vector<int>& labels) {
  std::vector<std::vector<uint64_t>> confusion(
      model.n_classes, std::vector<uint64_t>(model.n_classes, 0));
  for (size_t i = 0; i < features.size(); ++i)
    ++confusion[labels[i]][model.predict(features[i])];
  return f_score(confusion);
}

}  // namespace

std::vector<std::pair<size_t, double>> permutation_importance(
    const KnnModel& model, const std::vector<LabeledSample>& heldout,
    uint64_t seed, int repeats) {
  if (heldout.empty())
    fail(ErrorKind::schema, "permutation importance needs a held-out split");
  if (repeats < 1) fail(ErrorKind::schema, "repeats must be >= 1");

  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  features.reserve(heldout.size());
  for (const auto& s : heldout) {
    features.push_back(s.features);
    labels.push_back(s.label);
  }
  double baseline = eval_f(model, features, labels);

  std::vector<std::pair<size_t, double>> out;
  out.reserve(model.selected.size());
  for (size_t fi = 0; fi < model.selected.size(); ++fi) {
    size_t col = model.selected[fi];
    double drop_sum = 0;
    for (int rep = 0; rep < repeats; ++rep) {
      Rng rng(seed + fi * static_cast<uint64_t>(repeats) + rep);
      std::vector<size_t> perm(features.size());
      std::iota(perm.begin(), perm.end(), 0);
      shuffle_indices(perm, rng);
      auto shuffled = features;
      for (size_t i = 0; i < features.size(); ++i)
        shuffled[i][col] = features[perm[i]][col];
      drop_sum += baseline - eval_f(model, shuffled, labels);
    }
    out.emplace_back(col, drop_sum / repeats);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

EliminationResult iterative_elimination(const std::vector<LabeledSample>& dataset,
                                        int k, int folds, uint64_t seed,
                                        const std::string& catalog_version,
                                        int n_classes) {
  if (dataset.empty()) fail(ErrorKind::schema, "empty dataset");
  size_t dim = dataset[0].features.size();
  std::vector<size_t> active(dim);
  std::iota(active.begin(), active.end(), 0);

  EliminationResult result;
  int step = 0;
  while (true) {
    EvalReport cv = cross_validate(dataset, folds, seed, k, active,
                                   catalog_version, n_classes);
    result.curve.push_back({active.size(), cv.f_score,
                            cv.mean_prediction_time_us, cv.mean_distance_ops,
                            active});
    if (active.size() == 1) break;

    // Hold out ~30% (seeded) to rank features, then drop the least important.
    std::vector<size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    shuffle_indices(idx, rng);
    size_t n_train = std::max<size_t>(1, dataset.size() * 7 / 10);
    n_train = std::min(n_train, dataset.size() - 1);
    std::vector<LabeledSample> train_set, held_set;
    for (size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? train_set : held_set).push_back(dataset[idx[i]]);
    KnnModel model = train(train_set, std::min<int>(k, int(train_set.size())),
                           active, catalog_version, n_classes);
    auto ranking =
        permutation_importance(model, held_set, seed + 1000 + step, 5);
    // least important; importance ties drop the higher catalog index
    auto worst = ranking[0];
    for (const auto& r : ranking) {
      if (r.second < worst.second ||
          (r.second == worst.second && r.first > worst.first))
        worst = r;
    }
    active.erase(std::find(active.begin(), active.end(), worst.first));
    ++step;
  }

  double best_f = -1;
  for (const auto& p : result.curve) best_f = std::max(best_f, p.f_score);
  const EliminationPoint* pick = nullptr;
  for (const auto& p : result.curve)
    if (p.f_score == best_f && (!pick || p.n_features < pick->n_features))
      pick = &p;
  result.selected = pick->active;
  return result;
}

// ---------------------------------------------------------------------------
// Model container (versioned text)

void save_model(const KnnModel& model, std::ostream& out) {
  out << "retlab-model 1\n";
  out << "version " << kVersion << '\n';
  out << "catalog " << model.catalog_version << '\n';
  out << "objective " << objective_name(model.objective) << '\n';
  out << "k " << model.k << '\n';
  out << "classes " << model.n_classes << '\n';
  out << "selected " << model.selected.size();
  for (size_t s : model.selected) out << ' ' << s;
  out << '\n';
  size_t dim = model.standardizer.mean.size();
  out << "dims " << dim << '\n';
  out << "mean";
  for (double v : model.standardizer.mean) out << ' ' << format_double(v);
  out << "\nstd";
  for (double v : model.standardizer.stddev) out << ' ' << format_double(v);
  out << "\nrows " << model.train_raw.size() << '\n';
  for (size_t r = 0; r < model.train_raw.size(); ++r) {
    out << model.labels[r];
    for (double v : model.train_raw[r]) out << ' ' << format_double(v);
    out << '\n';
  }
}

namespace {

std::vector<std::string_view> expect_line(std::istream& in, std::string& buf,
                                          const char* key) {
  if (!std::getline(in, buf))
    fail(ErrorKind::parse, std::string("model file: missing ") + key);
  auto toks = split_ws(trim(buf));
  if (toks.empty() || toks[0] != key)
    fail(ErrorKind::parse, std::string("model file: expected '") + key + "'");
  return toks;
}

double parse_double_tok(std::string_view tok) {
  std::string s(tok);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    fail(ErrorKind::parse, "model file: bad number '" + s + "'");
  return v;
}

}  // namespace

KnnModel load_model(std::istream& in) {
  std::string buf;
  if (!std::getline(in, buf) || trim(buf) != "retlab-model 1")
    fail(ErrorKind::parse, "model file: bad magic (want 'retlab-model 1')");
  KnnModel m;
  expect_line(in, buf, "version");  // informational
  m.catalog_version = std::string(expect_line(in, buf, "catalog").at(1));
  m.objective = objective_from_name(std::string(expect_line(in, buf, "objective").at(1)));
  m.k = std::stoi(std::string(expect_line(in, buf, "k").at(1)));
  m.n_classes = std::stoi(std::string(expect_line(in, buf, "classes").at(1)));
  auto sel = expect_line(in, buf, "selected");
  size_t n_sel = std::stoull(std::string(sel.at(1)));
  if (sel.size() != n_sel + 2) fail(ErrorKind::parse, "model file: selected count");
  for (size_t i = 0; i < n_sel; ++i)
    m.selected.push_back(std::stoull(std::string(sel[2 + i])));
  size_t dim = std::stoull(std::string(expect_line(in, buf, "dims").at(1)));
  std::string mean_buf, std_buf;  // tokens view into these; keep them alive
  auto mean = expect_line(in, mean_buf, "mean");
  auto stddev = expect_line(in, std_buf, "std");
  if (mean.size() != dim + 1 || stddev.size() != dim + 1)
    fail(ErrorKind::parse, "model file: standardizer width mismatch");
  for (size_t i = 0; i < dim; ++i) {
    m.standardizer.mean.push_back(parse_double_tok(mean[1 + i]));
    m.standardizer.stddev.push_back(parse_double_tok(stddev[1 + i]));
  }
  size_t rows = std::stoull(std::string(expect_line(in, buf, "rows").at(1)));
  for (size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, buf)) fail(ErrorKind::parse, "model file: truncated rows");
    auto toks = split_ws(trim(buf));
    if (toks.size() != dim + 1)
      fail(ErrorKind::parse, "model file: row width mismatch");
    m.labels.push_back(std::stoi(std::string(toks[0])));
    std::vector<double> row(dim);
    for (size_t i = 0; i < dim; ++i) row[i] = parse_double_tok(toks[1 + i]);
    m.train_raw.push_back(std::move(row));
  }
  m.prepare();
  return m;
}

void save_model_file(const KnnModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write model file: " + path);
  save_model(model, out);
}

KnnModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open model file: " + path);
  return load_model(in);
}

}  // namespace retlab
