#pragma once

// Independent reference implementations used to cross-check the real ones.
// These are deliberately written in the most literal way possible and must
// not share code with the library paths they validate.

#include <algorithm>
#include <cstdint>
#include <list>
#include <map>
#include <vector>

#include "retlab/learn.hpp"
#include "retlab/rng.hpp"
#include "retlab/trace.hpp"

namespace retlab::testing {

// Plain set-associative LRU cache: per-set list of line numbers, most
// recently used at the front. Returns the hit/miss sequence.
class RefLruCache {
 public:
  RefLruCache(uint32_t sets, uint32_t ways, uint32_t line_bytes)
      : sets_(sets), ways_(ways), line_bytes_(line_bytes), lists_(sets) {}

  bool access(uint64_t addr) {
    uint64_t line = addr / line_bytes_;
    auto& lst = lists_[line % sets_];
    auto it = std::find(lst.begin(), lst.end(), line);
    if (it != lst.end()) {
      lst.erase(it);
      lst.push_front(line);
      return true;
    }
    lst.push_front(line);
    if (lst.size() > ways_) lst.pop_back();
    return false;
  }

 private:
  uint32_t sets_, ways_, line_bytes_;
  std::vector<std::list<uint64_t>> lists_;
};

// Event-list replay of the monitor-counter cache in nominal time: every block
// whose age since its last write reaches the threshold is dead, counted once
// per write epoch; dirt is written back. Produces expiry counts plus the
// hit/miss sequence for cross-checking.
struct RefExpiryResult {
  std::vector<bool> hits;
  uint64_t expiry_evictions = 0;
  uint64_t expiry_writebacks = 0;
};

inline RefExpiryResult ref_expiry_replay(const std::vector<AccessEvent>& events,
                                         uint32_t sets, uint32_t ways,
                                         uint32_t line_bytes, double threshold_ns,
                                         double ns_per_instr) {
  struct Block {
    uint64_t line;
    bool dirty;
    double last_write;
    uint64_t used;  // lru counter
  };
  std::vector<std::vector<Block>> cache(sets);
  RefExpiryResult out;
  uint64_t tick = 0;
  uint64_t instr = 0;

  auto reap = [&](std::vector<Block>& set, double now) {
    for (size_t i = 0; i < set.size();) {
      if (now - set[i].last_write >= threshold_ns) {
        ++out.expiry_evictions;
        if (set[i].dirty) ++out.expiry_writebacks;
        set.erase(set.begin() + i);
      } else {
        ++i;
      }
    }
  };

  for (const auto& e : events) {
    instr += e.instr_gap + 1;
    double now = static_cast<double>(instr) * ns_per_instr;
    uint64_t line = e.address / line_bytes;
    auto& set = cache[line % sets];
    reap(set, now);
    bool hit = false;
    for (auto& b : set) {
      if (b.line == line) {
        hit = true;
        b.used = ++tick;
        if (e.kind == AccessKind::write) {
          b.dirty = true;
          b.last_write = now;
        }
        break;
      }
    }
    if (!hit) {
      if (set.size() == ways) {
        size_t victim = 0;
        for (size_t i = 1; i < set.size(); ++i)
          if (set[i].used < set[victim].used) victim = i;
        set.erase(set.begin() + victim);
      }
      set.push_back({line, e.kind == AccessKind::write, now, ++tick});
    }
    out.hits.push_back(hit);
  }
  // End of simulation: epochs that reached the threshold by then still count.
  uint64_t end_instr = instr;
  double end_now = static_cast<double>(end_instr) * ns_per_instr;
  for (auto& set : cache) reap(set, end_now);
  return out;
}

// Exhaustive nearest-neighbor scan with the documented tie rules, written
// without any shortcuts: full sort of (distance, label, row).
inline int knn_scan_oracle(const std::vector<std::vector<double>>& rows,
                           const std::vector<int>& labels,
                           const std::vector<double>& query, int k,
                           int n_classes) {
  struct Entry {
    double d2;
    int label;
    size_t row;
  };
  std::vector<Entry> entries;
  for (size_t r = 0; r < rows.size(); ++r) {
    double d2 = 0;
    for (size_t j = 0; j < query.size(); ++j)
      d2 += (query[j] - rows[r][j]) * (query[j] - rows[r][j]);
    entries.push_back({d2, labels[r], r});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.label != b.label) return a.label < b.label;
    return a.row < b.row;
  });
  int kk = std::min<int>(k, static_cast<int>(entries.size()));
  std::map<int, int> votes;
  for (int i = 0; i < kk; ++i) ++votes[entries[i].label];
  int best_count = 0;
  for (auto& [label, count] : votes) best_count = std::max(best_count, count);
  for (int i = 0; i < kk; ++i)
    if (votes[entries[i].label] == best_count) return entries[i].label;
  (void)n_classes;
  return entries[0].label;
}

// Seeded random single-phase workload for oracle comparisons.
inline Workload random_workload(uint64_t seed, size_t n_events,
                                uint64_t address_space_lines,
                                double write_fraction = 0.4,
                                uint64_t max_gap = 20) {
  Rng rng(seed);
  Workload w;
  w.phases.push_back({"p0", 1.0, {}});
  for (size_t i = 0; i < n_events; ++i) {
    AccessEvent e;
    e.instr_gap = rng.below(max_gap + 1);
    e.kind = rng.bernoulli(write_fraction) ? AccessKind::write : AccessKind::read;
    e.address = rng.below(address_space_lines) * 64;
    w.phases[0].events.push_back(e);
  }
  return w;
}

}  // namespace retlab::testing
