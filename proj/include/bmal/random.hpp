#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bmal/atoms.hpp"

namespace bmal {

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64 seeded through std::seed_seq with
/// (seed, stream), both fully specified by the standard. Distributions are
/// implemented here because the standard library ones are not portable.
/// Independent streams (one per bootstrap replicate or benchmark cell) are
/// obtained by varying `stream`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal (Marsaglia polar method).
  double normal();

  /// k distinct indices from [0, n), in selection order.
  std::vector<Index> sample_without_replacement(Index n, Index k);
  /// n indices drawn from [0, n) with replacement.
  std::vector<Index> resample(Index n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Intercept column followed by (k - 1) independent standard normals.
MatrixXd gaussian_pool(Index n, Index k, Rng& rng);

}  // namespace bmal
