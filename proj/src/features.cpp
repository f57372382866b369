#include "retlab/features.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "retlab/error.hpp"
#include "retlab/util.hpp"

namespace retlab {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

double per_ki(const SimStats& s, double count) {
  return count / (static_cast<double>(s.instructions) / 1000.0);
}

using Extractor = double (*)(const SimStats&);

// Formula registry. Keep in sync with the catalog list below; names are the
// contract.
const std::unordered_map<std::string, Extractor>& registry() {
  static const std::unordered_map<std::string, Extractor> map = {
      {"l1_read_per_ki",
       [](const SimStats& s) { return per_ki(s, double(s.l1_reads)); }},
      {"l1_write_per_ki",
       [](const SimStats& s) { return per_ki(s, double(s.l1_writes)); }},
      {"l1_read_miss_rate",
       [](const SimStats& s) {
         return ratio(double(s.l1_read_misses), double(s.l1_reads));
       }},
      {"l1_write_miss_rate",
       [](const SimStats& s) {
         return ratio(double(s.l1_write_misses), double(s.l1_writes));
       }},
      {"l1_total_miss_rate",
       [](const SimStats& s) {
         return ratio(double(s.l1_misses()), double(s.l1_accesses()));
       }},
      {"writeback_per_ki",
       [](const SimStats& s) { return per_ki(s, double(s.l1_writebacks)); }},
      {"l2_access_per_ki",
       [](const SimStats& s) { return per_ki(s, double(s.l2_accesses)); }},
      {"l2_miss_rate",
       [](const SimStats& s) {
         return ratio(double(s.l2_misses), double(s.l2_accesses));
       }},
      {"l2_miss_per_ki",  // DRAM-burst proxy
       [](const SimStats& s) { return per_ki(s, double(s.l2_misses)); }},
      {"unique_lines_per_ki",
       [](const SimStats& s) { return per_ki(s, double(s.unique_lines)); }},
      {"read_write_ratio",
       [](const SimStats& s) {
         // zero writes: denominator conventionally 1
         return s.l1_writes ? double(s.l1_reads) / double(s.l1_writes)
                            : double(s.l1_reads);
       }},
      {"dirty_eviction_ratio",
       [](const SimStats& s) {
         return ratio(double(s.l1_writebacks), double(s.l1_evictions));
       }},
      {"mean_write_reuse_gap_ns",
       [](const SimStats& s) { return s.write_gaps.mean_ns(); }},
      {"p90_write_reuse_gap_ns",
       [](const SimStats& s) { return s.write_gaps.p90_ns(); }},
      {"mean_read_reuse_gap_ns",
       [](const SimStats& s) { return s.read_gaps.mean_ns(); }},
      {"set_conflict_ratio",  // fraction of misses that evicted a live block
       [](const SimStats& s) {
         return ratio(double(s.l1_evictions), double(s.l1_misses()));
       }},
      {"streaming_ratio",  // lines touched exactly once
       [](const SimStats& s) {
         return ratio(double(s.single_access_lines), double(s.unique_lines));
       }},
      {"store_burstiness",  // mean length of consecutive-write runs
       [](const SimStats& s) {
         return ratio(double(s.l1_writes), double(s.write_runs));
       }},
      {"hit_run_length_mean",
       [](const SimStats& s) {
         return ratio(double(s.l1_hits()), double(s.hit_runs));
       }},
      {"instructions_per_event",
       [](const SimStats& s) {
         return ratio(double(s.instructions), double(s.l1_accesses()));
       }},
  };
  return map;
}

FeatureCatalog make_catalog(std::vector<std::string> names) {
  std::string joined;
  for (const auto& n : names) {
    joined += n;
    joined += '\n';
  }
  FeatureCatalog c;
  c.version = "v1-" + fnv1a64_hex(joined);
  c.names = std::move(names);
  return c;
}

}  // namespace

const FeatureCatalog& default_catalog() {
  static const FeatureCatalog catalog = make_catalog({
      "l1_read_per_ki",
      "l1_write_per_ki",
      "l1_read_miss_rate",
      "l1_write_miss_rate",
      "l1_total_miss_rate",
      "writeback_per_ki",
      "l2_access_per_ki",
      "l2_miss_rate",
      "l2_miss_per_ki",
      "unique_lines_per_ki",
      "read_write_ratio",
      "dirty_eviction_ratio",
      "mean_write_reuse_gap_ns",
      "p90_write_reuse_gap_ns",
      "mean_read_reuse_gap_ns",
      "set_conflict_ratio",
      "streaming_ratio",
      "store_burstiness",
      "hit_run_length_mean",
      "instructions_per_event",
  });
  return catalog;
}

void write_catalog_manifest(const FeatureCatalog& catalog, std::ostream& out) {
  out << "retlab-catalog " << catalog.version << '\n';
  for (const auto& n : catalog.names) out << "feature " << n << '\n';
}

FeatureCatalog read_catalog_manifest(std::istream& in) {
  FeatureCatalog c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(trim(line));
    if (toks.empty()) continue;
    if (line_no == 1) {
      if (toks.size() != 2 || toks[0] != "retlab-catalog")
        fail(ErrorKind::parse, "catalog manifest: bad header");
      c.version = std::string(toks[1]);
    } else {
      if (toks.size() != 2 || toks[0] != "feature")
        fail(ErrorKind::parse, "catalog manifest: bad line " +
                                   std::to_string(line_no));
      c.names.emplace_back(toks[1]);
    }
  }
  if (c.version.empty()) fail(ErrorKind::parse, "catalog manifest: empty");
  return c;
}

std::vector<double> extract(const SimStats& stats, const FeatureCatalog& catalog) {
  if (stats.instructions == 0)
    fail(ErrorKind::schema, "cannot extract features from a zero-instruction window");
  std::vector<double> out;
  out.reserve(catalog.names.size());
  const auto& reg = registry();
  for (const auto& name : catalog.names) {
    auto it = reg.find(name);
    if (it == reg.end())
      fail(ErrorKind::schema, "unknown feature in catalog: " + name);
    double v = it->second(stats);
    if (!std::isfinite(v))
      fail(ErrorKind::schema, "feature " + name + " is not finite");
    out.push_back(v);
  }
  return out;
}

std::vector<double> Standardizer::apply(const std::vector<double>& v) const {
  if (v.size() != mean.size())
    fail(ErrorKind::schema, "standardizer dimension mismatch");
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    out[i] = stddev[i] > 0 ? (v[i] - mean[i]) / stddev[i] : 0.0;
  return out;
}

Standardizer fit_standardizer(const std::vector<std::vector<double>>& vectors) {
  if (vectors.size() < 2)
    fail(ErrorKind::schema, "standardizer needs at least 2 vectors");
  size_t dim = vectors[0].size();
  for (const auto& v : vectors)
    if (v.size() != dim)
      fail(ErrorKind::schema, "inconsistent feature dimensions");
  Standardizer s;
  s.mean.assign(dim, 0.0);
  s.stddev.assign(dim, 0.0);
  double n = static_cast<double>(vectors.size());
  for (const auto& v : vectors)
    for (size_t i = 0; i < dim; ++i) s.mean[i] += v[i];
  for (size_t i = 0; i < dim; ++i) s.mean[i] /= n;
  for (const auto& v : vectors)
    for (size_t i = 0; i < dim; ++i) {
      double d = v[i] - s.mean[i];
      s.stddev[i] += d * d;
    }
  for (size_t i = 0; i < dim; ++i) s.stddev[i] = std::sqrt(s.stddev[i] / n);
  return s;
}

}  // namespace retlab
