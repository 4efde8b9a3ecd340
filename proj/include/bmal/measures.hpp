#pragma once

#include <span>
#include <vector>

#include "bmal/atoms.hpp"
#include "bmal/measure.hpp"

namespace bmal {

/// Steepest-gradient measure: the maximizer of sum_i w'_i scores_i over the
/// capped simplex. The top floor(1/eps) scores get eps, the next one gets the
/// residual 1 - eps*floor(1/eps). Ties go to the smaller index. Scores of
/// +infinity are always placed first (used to pin indices at the cap).
Measure sg_measure(const VectorXd& scores, double epsilon);

/// sg_measure, repaired towards `fallback` when its information is singular:
/// (1 - delta) sg + delta fallback with delta = 1e-6, 1e-5, ..., 1e-2.
Measure psg_measure(const VectorXd& scores, double epsilon, const AtomSet& atoms, const Measure& fallback);

/// Euclidean projection of v onto { u : 0 <= u_i <= eps, sum u_i = mass }.
VectorXd project_capped_simplex(const VectorXd& v, double epsilon, double mass);

/// Max of sum_i y_i scores_i over { 0 <= y_i <= eps, sum y_i = mass }.
double capped_linear_max(const VectorXd& scores, double epsilon, double mass);

/// The n indices with the largest weights; ties by larger score, then smaller index.
SampleSet round_to_sample(const Measure& w, Index n, const VectorXd& scores);
/// Same, restricted to indices not in `exclude`.
SampleSet round_to_sample(const Measure& w, Index n, const VectorXd& scores, std::span<const Index> exclude);

/// w_i = 1/n on the sample, epsilon = 1/n.
Measure measure_of_sample(const SampleSet& s, Index pool_size);

struct TrichotomyReport {
  double c_low;   // max leverage over zero-weight points (-inf if none)
  double c_high;  // min leverage over capped points (+inf if none)
  std::vector<Index> violations;
  bool passed;
};

/// Checks the threshold structure of an optimal measure: zero weights below
/// a constant c, capped weights above it, interior weights on it.
TrichotomyReport trichotomy_check(const Measure& w, const VectorXd& leverages, double tol);

}  // namespace bmal
