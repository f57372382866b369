#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retlab/features.hpp"

namespace retlab {

enum class Objective : uint8_t { latency, energy };

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct LabeledSample {
  std::vector<double> features;  // raw, full catalog width
  int label = 0;                 // retention index into the retention set
  Objective objective = Objective::latency;
  std::string workload_id;
  std::string phase_id;
};

// Lazy learner: training stores the standardized matrix, nothing else.
// Distances are Euclidean over the standardized selected features.
// Tie rules (required for reproducible runs): neighbors are ordered by
// (distance, label, row index); a vote tie is broken by the nearest neighbor
// whose label is among the tied labels.
struct KnnModel {
  int k = 3;
  int n_classes = 6;
  Objective objective = Objective::latency;
  std::string catalog_version;
  std::vector<size_t> selected;                 // feature indices
  Standardizer standardizer;                    // full catalog width
  std::vector<std::vector<double>> train_raw;   // full width rows
  std::vector<int> labels;

  int predict(const std::vector<double>& raw_features) const;
  // Also reports the number of distance multiply-accumulates performed.
  int predict_counted(const std::vector<double>& raw_features,
                      uint64_t& distance_ops) const;

  size_t size() const { return train_raw.size(); }

 private:
  friend KnnModel train(const std::vector<LabeledSample>&, int,
                        const std::vector<size_t>&, const std::string&, int);
  friend KnnModel load_model(std::istream&);
  void prepare();
  std::vector<std::vector<double>> train_sel_;  // standardized selected rows
};

KnnModel train(const std::vector<LabeledSample>& dataset, int k,
               const std::vector<size_t>& selected_features,
               const std::string& catalog_version, int n_classes = 6);

struct EvalReport {
  double f_score = 0;
  std::vector<std::vector<uint64_t>> confusion;  // [actual][predicted]
  std::vector<double> precision;
  std::vector<double> recall;
  double mean_prediction_time_us = 0;  // wall time; excluded from determinism
  uint64_t mean_distance_ops = 0;      // per query, deterministic
  uint64_t seed = 0;
  int folds = 0;
};

// Macro-averaged F1 over all classes of the matrix; a class with
// precision+recall == 0 contributes 0.
double f_score(const std::vector<std::vector<uint64_t>>& confusion);

// Seeded shuffle, `folds` near-equal partitions, every sample tested once.
EvalReport cross_validate(const std::vector<LabeledSample>& dataset, int folds,
                          uint64_t seed, int k,
                          const std::vector<size_t>& selected_features,
                          const std::string& catalog_version, int n_classes = 6);

// Mean drop in macro-F on `heldout` when one feature column is permuted.
// Returns (feature index, importance) for every model-selected feature,
// sorted by importance descending (ties: lower index first).
std::vector<std::pair<size_t, double>> permutation_importance(
    const KnnModel& model, const std::vector<LabeledSample>& heldout,
    uint64_t seed, int repeats = 5);

struct EliminationPoint {
  size_t n_features = 0;
  double f_score = 0;
  double mean_prediction_time_us = 0;
  uint64_t mean_distance_ops = 0;
  std::vector<size_t> active;
};

struct EliminationResult {
  std::vector<size_t> selected;  // smallest set achieving the max F-score
  std::vector<EliminationPoint> curve;  // one point per count, full down to 1
};

EliminationResult iterative_elimination(const std::vector<LabeledSample>& dataset,
                                        int k, int folds, uint64_t seed,
                                        const std::string& catalog_version,
                                        int n_classes = 6);

void save_model(const KnnModel& model, std::ostream& out);
KnnModel load_model(std::istream& in);
void save_model_file(const KnnModel& model, const std::string& path);
KnnModel load_model_file(const std::string& path);

}  // namespace retlab
