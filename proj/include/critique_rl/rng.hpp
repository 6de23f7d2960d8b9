#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace crl {

/// Deterministic random stream. Streams are addressed by (seed, index) so that
/// the i-th episode of a run sees the same draws regardless of evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for element `index` of the run seeded with `seed`.
  static RngStream derive(std::uint64_t seed, std::uint64_t index);
  static RngStream derive(std::uint64_t seed, std::uint64_t index, std::uint64_t sub);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n).
  std::size_t uniform_index(std::size_t n);

  /// Draw an index from unnormalized nonnegative weights by inverse CDF.
  std::size_t categorical(std::span<const double> weights);

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to mix stream coordinates into engine seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace crl
