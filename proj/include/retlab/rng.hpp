#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace retlab {

// Seeded RNG wrapper. The engine (mt19937_64) is specified bit-exactly by the
// standard; the distribution transforms live here because the standard library
// distributions are implementation-defined and would break byte-identical
// trace generation across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Modulo bias is negligible for n << 2^64 and keeps the stream simple.
    return engine_() % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double mean) {
    return -mean * std::log1p(-uniform());
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace retlab
