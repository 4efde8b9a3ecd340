#include "bmal/measure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bmal/errors.hpp"

namespace bmal {

Measure::Measure(VectorXd weights, double epsilon) : w_(std::move(weights)), eps_(epsilon) {
  if (!(eps_ > 0.0) || !std::isfinite(eps_)) throw InfeasibleEpsilon("epsilon must be positive and finite");
  if (static_cast<double>(w_.size()) * eps_ < 1.0 - 1e-12)
    throw InfeasibleEpsilon("N * epsilon = " + std::to_string(static_cast<double>(w_.size()) * eps_) + " < 1");
  for (Index i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_[i])) throw InvalidArgument("measure weight " + std::to_string(i) + " is not finite");
    if (w_[i] < 0.0) {
      if (w_[i] < -1e-12) throw InvalidArgument("measure weight " + std::to_string(i) + " is negative");
      w_[i] = 0.0;
    }
    if (w_[i] > eps_ + 1e-12) throw InvalidArgument("measure weight " + std::to_string(i) + " exceeds epsilon");
  }
  if (std::abs(w_.sum() - 1.0) > 1e-10) throw InvalidArgument("measure weights do not sum to one");
}

Measure Measure::uniform(Index n, double epsilon) {
  if (n <= 0) throw EmptyInput("uniform measure on an empty pool");
  const double u = 1.0 / static_cast<double>(n);
  return Measure(VectorXd::Constant(n, u), std::max(epsilon, u));
}

Measure Measure::mix(const Measure& other, double alpha) const {
  if (other.size() != size()) throw DimensionMismatch("measures live on pools of different size");
  VectorXd w = (1.0 - alpha) * w_ + alpha * other.w_;
  return Measure(std::move(w), std::max(eps_, other.eps_));
}

SampleSet::SampleSet(std::vector<Index> indices) : idx_(std::move(indices)) {
  std::sort(idx_.begin(), idx_.end());
  if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end()) throw InvalidArgument("sample indices are not distinct");
  if (!idx_.empty() && idx_.front() < 0) throw InvalidArgument("negative sample index");
}

bool SampleSet::contains(Index i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }

}  // namespace bmal
