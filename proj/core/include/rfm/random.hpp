#pragma once

#include <cstdint>
#include <random>

namespace rfm {

/// Reproducible random stream identified by (seed, stream).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Seeds are mixed with splitmix64 so that nearby (seed, stream)
/// pairs give unrelated sequences. Real-valued draws are produced here rather
/// than through <random> distributions, which differ between standard
/// library implementations.
class RandomSource {
 public:
  RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, cached second variate).
  double normal();
  std::uint64_t next_u64() { return engine_(); }

  /// Independent child stream, deterministic in (seed, stream, child).
  RandomSource derive(std::uint64_t child) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace rfm
