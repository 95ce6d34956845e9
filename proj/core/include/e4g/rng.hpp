#pragma once

#include <cstdint>
#include <random>

namespace e4g {

// splitmix64 step; used to mix seeds and tags into independent streams.
uint64_t hash_mix(uint64_t x);
uint64_t hash_mix(uint64_t a, uint64_t b);
uint64_t hash_mix(uint64_t a, uint64_t b, uint64_t c);

// Deterministic random generator. The engine is mt19937_64 (fully specified
// by the standard), and all value conversions are done by hand so that a
// given seed yields the same stream on every platform and toolchain.
//
// Sub-generators are derived with split(tag): split(t) of a generator seeded
// with s behaves as Rng(hash_mix(s, t)). All components that fan one seed
// out to parallel work (patients, mcdrop samples, batches) go through split.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  // Standard normal via Box-Muller; one cached spare per pair.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  Rng split(uint64_t tag) const { return Rng(hash_mix(seed_, tag)); }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace e4g
