#pragma once

#include <cstdint>
#include <random>

namespace lutdla {

/// Seeded generator with library-independent draws. The standard
/// distributions are implementation-defined, so uniform and normal variates
/// are derived from raw 64-bit output here to keep results identical across
/// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Decorrelates derived seeds (per subspace, per layer, ...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace lutdla
