#pragma once

#include <string>
#include <vector>

#include "retlab/cachesim.hpp"
#include "retlab/config.hpp"
#include "retlab/learn.hpp"
#include "retlab/policy.hpp"

namespace retlab {

// All result files embed the tool version and the feature catalog version;
// comparisons refuse files produced against a different catalog.

std::string stats_to_json(const SimResult& result, const RetentionProfile& profile,
                          const TimingParams& timing, const MonitorConfig& monitor,
                          const std::string& workload_id,
                          const std::string& input_hash);

void write_dataset_csv(const std::vector<DatasetRow>& rows,
                       const FeatureCatalog& catalog,
                       const std::vector<std::string>& profile_names,
                       std::ostream& out);
std::vector<DatasetRow> read_dataset_csv(std::istream& in,
                                         const FeatureCatalog& expected_catalog,
                                         size_t n_profiles);
void write_dataset_file(const std::vector<DatasetRow>& rows,
                        const FeatureCatalog& catalog,
                        const std::vector<std::string>& profile_names,
                        const std::string& path);
std::vector<DatasetRow> read_dataset_file(const std::string& path,
                                          const FeatureCatalog& expected_catalog,
                                          size_t n_profiles);

std::string eval_report_to_json(const EvalReport& report,
                                const std::string& objective);

std::string elimination_curve_csv(const EliminationResult& result,
                                  const FeatureCatalog& catalog);
void write_selected_features(const std::vector<size_t>& selected,
                             const FeatureCatalog& catalog, std::ostream& out);
std::vector<size_t> read_selected_features(std::istream& in,
                                           const FeatureCatalog& expected_catalog);

std::string policy_result_to_json(const PolicyResult& result,
                                  const PolicyConfig& config,
                                  const std::string& input_hash);
// Reads back the fields `compare` needs; refuses catalog mismatches.
PolicyResult read_policy_result_file(const std::string& path);

std::string exhaustive_table_to_json(const ExhaustiveTable& table,
                                     const PolicyConfig& config,
                                     const std::string& input_hash);

std::string savings_to_csv(const SavingsReport& report);

}  // namespace retlab
