#pragma once

#include "bmal/atoms.hpp"
#include "bmal/measure.hpp"

namespace bmal {

struct BaselineResult {
  SampleSet sample;
  double criterion_value = 0.0;  // |M(S)|^{-1/k}, the D-criterion of the unnormalized sample
  int iterations = 0;            // deletions (backward) or accepted swaps (exchange)
  double wall_seconds = 0.0;
  bool timed_out = false;
};

struct BaselineOptions {
  int max_sweeps = 100000;          // exchange only
  double time_limit_seconds = 0.0;  // 0 = unlimited
};

/// Greedy backward deletion: start from the whole pool and repeatedly drop
/// the point with the smallest leverage x^T M(S)^{-1} x until n remain.
BaselineResult backward_select(const AtomSet& atoms, Index n, const BaselineOptions& opts = {});

/// Exchange: from the top-n leverage sample, swap the smallest-leverage
/// member for the largest-leverage non-member while |M(S)| increases.
BaselineResult exchange_select(const AtomSet& atoms, Index n, const BaselineOptions& opts = {});

}  // namespace bmal
