#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "retlab/cachesim.hpp"

namespace retlab {

// Ordered list of feature names. Each name maps to an extraction formula over
// SimStats (see features.cpp); the catalog is data so new features can be
// added without touching the learner. Trained models record the version they
// were built against and refuse mismatched inputs.
struct FeatureCatalog {
  std::string version;
  std::vector<std::string> names;

  size_t size() const { return names.size(); }
};

// The default 20-feature catalog (counter-derived rates, per-kilo-instruction
// densities and reuse-gap summaries).
const FeatureCatalog& default_catalog();

// Versioned text manifest for catalog compatibility checks.
void write_catalog_manifest(const FeatureCatalog& catalog, std::ostream& out);
FeatureCatalog read_catalog_manifest(std::istream& in);

// Degenerate denominators (no accesses of a kind) yield 0; all rates are in
// [0,1], all values finite. Requires stats.instructions > 0.
std::vector<double> extract(const SimStats& stats, const FeatureCatalog& catalog);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std; 0 marks a constant feature

  // Features with zero std map to 0.
  std::vector<double> apply(const std::vector<double>& v) const;
};

// Requires at least 2 vectors, all of equal dimension.
Standardizer fit_standardizer(const std::vector<std::vector<double>>& vectors);

}  // namespace retlab
