#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bmal/atoms.hpp"
#include "bmal/criteria.hpp"
#include "bmal/measure.hpp"

namespace bmal {

struct SolverConfig {
  double epsilon = 0.0;  // cap; for_sample_size() sets 1/n
  double v0 = 1e-3;      // gap tolerance of the boost phase
  double v = 1e-6;       // final gap tolerance
  double r = 0.25;       // boost step cap
  double u = 1e-12;      // guard added to the curvature in the boost step
  int max_boost_iters = 5000;
  int max_outer_iters = 200;
  double inner_tol = 1e-10;
  int inner_max_iters = 10000;
  std::uint64_t seed = 0;
  bool skip_refine = false;   // stop after the boost phase regardless of v
  double time_limit_seconds = 0.0;  // 0 = unlimited
  /// Indices held at weight epsilon throughout (already purchased points).
  std::vector<Index> pinned;

  static SolverConfig for_sample_size(Index n);
  void validate() const;
};

enum class Phase { Init, Boost, Refine, Safeguard };
std::string to_string(Phase phase);

struct TraceRecord {
  Phase phase;
  double phi;
  double gap_ratio;
  double alpha;       // boost step size (0 for refine records)
  Index t1;           // |T1| of the restricted subproblem
  Index t2;           // |T2|
  int inner_iterations;
  double wall_ms;     // since solver start
};

using SolveTrace = std::vector<TraceRecord>;

struct SolveResult {
  Measure w;
  SolveTrace trace{};
  double phi = 0.0;
  double gap_ratio = 0.0;
  VectorXd leverages{};  // phi_p(x_i, w) at the returned measure
  bool converged = false;
  bool timed_out = false;
  int boost_iterations = 0;
  int outer_iterations = 0;
  double boost_seconds = 0.0;
  double refine_seconds = 0.0;
};

struct GapResult {
  double gap_ratio;
  Measure sg;
};

/// Relative equivalence-theorem gap (sum_i sg_i phi_p(x_i,w) - Phi_p) / Phi_p
/// together with the steepest-gradient measure of w.
GapResult optimality_gap(const Measure& w, const AtomSet& atoms, const CriterionSpec& spec);

struct BoostResult {
  Measure w_next;
  double alpha;
};

/// One damped step (1 - alpha) w + alpha sg with
///   alpha = min(r, max(0, -eta / (tau + u)))
/// halved up to 20 times while it would increase Phi_p.
BoostResult boost_step(const Measure& w, const Measure& sg, const AtomSet& atoms, const CriterionSpec& spec,
                       const SolverConfig& cfg);

struct RestrictedResult {
  Measure w;
  Index t1 = 0;
  Index t2 = 0;
  Index free = 0;
  int iterations = 0;
  double restricted_gap = 0.0;
};

/// Minimizes Phi_p with w_i fixed at epsilon on T1 = {w_i = sg_i = eps} and
/// at 0 on T2 = {w_i = sg_i = 0}, by projected gradient over the free
/// coordinates. Never returns a worse measure than w.
RestrictedResult restricted_minimize(const Measure& w, const Measure& sg, const AtomSet& atoms,
                                     const CriterionSpec& spec, const SolverConfig& cfg);

/// Alternates steepest-gradient directions and restricted minimization
/// until the gap falls to cfg.v.
SolveResult solve_alg2(const Measure& w0, const AtomSet& atoms, const CriterionSpec& spec, const SolverConfig& cfg);

/// Boost from the SG measure of the uniform measure down to gap v0, then
/// refine with solve_alg2 down to v.
SolveResult solve_hybrid(const AtomSet& atoms, const CriterionSpec& spec, const SolverConfig& cfg);

/// D-criterion specialization driven by raw leverages x^T M^{-1} x; stops
/// once Tr(M(w)^{-1} M(sg)) < k (1 + v).
SolveResult solve_d_alg1(const AtomSet& atoms, const SolverConfig& cfg);

struct EfficiencyBounds {
  double ratio;                  // Phi_p(solved) / Phi_p(candidate)
  double certified_lower_bound;  // (Phi_p(solved) + eta(sg, solved)) / Phi_p(candidate)
  double solved_gap;
};

EfficiencyBounds efficiency_bounds(const Measure& candidate, const Measure& solved, const AtomSet& atoms,
                                   const CriterionSpec& spec);

}  // namespace bmal
