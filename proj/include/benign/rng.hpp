#pragma once

#include <cstdint>
#include <random>

namespace benign {

/// Mixes a 64-bit word with the SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a base seed and a list of
/// coordinates (e.g. dimension and replicate index). Order-sensitive.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) noexcept;

/// Reproducible random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions from <random> are implementation-defined, so
/// uniform and normal variates are produced here instead:
///   - uniform01: top 53 bits of one engine output, scaled to [0, 1).
///   - normal: Marsaglia polar method with a cached second variate.
///   - below: rejection sampling on the top bits (unbiased).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace benign
