#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace retlab {

// Shortest decimal representation that parses back to exactly the same
// double. Used everywhere a float is serialized so that re-serialization is
// byte-identical.
inline std::string format_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline uint64_t fnv1a64(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view data) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(data)));
  return buf;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

// Open-addressing map for line-address profiling. unordered_map is too slow
// on the simulator hot path; keys are cache line numbers (never the sentinel).
template <typename V>
class LineMap {
 public:
  LineMap() { rehash(1 << 12); }

  V& operator[](uint64_t key) {
    if ((size_ + 1) * 10 >= capacity_ * 7) rehash(capacity_ * 2);
    size_t i = probe(key);
    if (keys_[i] == kEmpty) {
      keys_[i] = key;
      vals_[i] = V{};
      ++size_;
    }
    return vals_[i];
  }

  const V* find(uint64_t key) const {
    size_t i = probe(key);
    return keys_[i] == kEmpty ? nullptr : &vals_[i];
  }

  size_t size() const { return size_; }

  void clear() {
    size_ = 0;
    std::fill(keys_.begin(), keys_.end(), kEmpty);
  }

 private:
  static constexpr uint64_t kEmpty = ~0ULL;

  size_t probe(uint64_t key) const {
    size_t mask = capacity_ - 1;
    size_t i = (key * 0x9e3779b97f4a7c15ULL) & mask;
    while (keys_[i] != kEmpty && keys_[i] != key) i = (i + 1) & mask;
    return i;
  }

  void rehash(size_t cap) {
    std::vector<uint64_t> old_keys = std::move(keys_);
    std::vector<V> old_vals = std::move(vals_);
    capacity_ = cap;
    keys_.assign(cap, kEmpty);
    vals_.assign(cap, V{});
    for (size_t i = 0; i < old_keys.size(); ++i) {
      if (old_keys[i] == kEmpty) continue;
      size_t j = probe(old_keys[i]);
      keys_[j] = old_keys[i];
      vals_[j] = old_vals[i];
    }
  }

  size_t capacity_ = 0;
  size_t size_ = 0;
  std::vector<uint64_t> keys_;
  std::vector<V> vals_;
};

}  // namespace retlab
