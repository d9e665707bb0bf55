#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpgan {

/// Deterministic random source. mt19937_64 has a fully specified output
/// sequence; all distribution transforms are hand-rolled here because the
/// std distributions are implementation-defined. A (seed, call sequence)
/// pair therefore reproduces bit-identically on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; draws come in cached pairs.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::size_t index(std::size_t n);

  /// Independent child stream labelled by a tag; used to give each
  /// subsystem its own documented stream derived from the root seed.
  Rng fork(std::string_view tag) const;

  static std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace dpgan
