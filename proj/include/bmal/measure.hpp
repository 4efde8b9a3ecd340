#pragma once

#include <cmath>
#include <vector>

#include "bmal/atoms.hpp"

namespace bmal {

/// Classification bands for "at zero" / "at cap" membership.
inline constexpr double kZeroBand = 1e-9;
inline constexpr double kCapBand = 1e-9;

/// A weight vector on the candidate pool lying in the capped simplex
///   { w : 0 <= w_i <= epsilon, sum_i w_i = 1 }.
/// Construction validates the constraints; instances are immutable.
class Measure {
 public:
  Measure(VectorXd weights, double epsilon);

  /// w_i = 1/N with epsilon = 1/N unless a larger cap is given.
  static Measure uniform(Index n, double epsilon = 0.0);

  const VectorXd& weights() const { return w_; }
  double epsilon() const { return eps_; }
  Index size() const { return w_.size(); }
  double operator[](Index i) const { return w_[i]; }

  bool at_cap(Index i) const { return std::abs(w_[i] - eps_) <= kCapBand; }
  bool at_zero(Index i) const { return w_[i] <= kZeroBand; }

  /// (1 - alpha) * this + alpha * other. Both must share epsilon.
  Measure mix(const Measure& other, double alpha) const;

 private:
  VectorXd w_;
  double eps_;
};

/// Sorted set of distinct pool indices.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::vector<Index> indices);

  const std::vector<Index>& indices() const { return idx_; }
  Index size() const { return static_cast<Index>(idx_.size()); }
  bool contains(Index i) const;
  bool operator==(const SampleSet&) const = default;

 private:
  std::vector<Index> idx_;
};

}  // namespace bmal
