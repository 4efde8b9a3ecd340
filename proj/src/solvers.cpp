#include "bmal/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>

#include "bmal/errors.hpp"
#include "bmal/measures.hpp"

namespace bmal {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kDescentSlack = 1e-12;  // relative slack of the monotone-descent checks

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Everything an iteration needs at the current measure.
struct Eval {
  InfoState st;
  VectorXd lev;
  Measure sg;
  double gap;
};

VectorXd ranking_scores(const VectorXd& lev, const std::vector<Index>& pinned) {
  VectorXd s = lev;
  for (Index i : pinned) s[i] = std::numeric_limits<double>::infinity();
  return s;
}

Eval evaluate(const Measure& w, const AtomSet& atoms, const CriterionSpec& spec, const std::vector<Index>& pinned) {
  InfoState st = build_info_state(atoms, w, spec);
  VectorXd lev = phi_p_leverages(atoms, st);
  Measure sg = psg_measure(ranking_scores(lev, pinned), w.epsilon(), atoms, w);
  const double gap = std::max(0.0, (sg.weights().dot(lev) - st.phi_value) / st.phi_value);
  return Eval{std::move(st), std::move(lev), std::move(sg), gap};
}

struct Deadline {
  Clock::time_point t0;
  double limit;
  bool expired() const {
    return limit > 0.0 && std::chrono::duration<double>(Clock::now() - t0).count() > limit;
  }
};

BoostResult boost_from(const Measure& w, const Eval& e, const AtomSet& atoms, const CriterionSpec& spec,
                       const SolverConfig& cfg) {
  const double phi = e.st.phi_value;
  const double neg_eta = e.sg.weights().dot(e.lev) - phi;
  const MatrixXd m_sg = atoms.information(e.sg.weights());
  double curvature = 0.0;
  try {
    curvature = tau_from_information(e.st.M, m_sg, spec);
  } catch (const SingularInformation&) {
    curvature = 0.0;  // rely on the backtracking below
  }
  double alpha = std::min(cfg.r, std::max(0.0, neg_eta / (curvature + cfg.u)));
  for (int halvings = 0; alpha > 0.0; ++halvings) {
    if (halvings > 20) {
      alpha = 0.0;
      break;
    }
    double next = std::numeric_limits<double>::infinity();
    try {
      next = criterion_from_information((1.0 - alpha) * e.st.M + alpha * m_sg, spec);
    } catch (const SingularInformation&) {
    }
    if (next <= phi * (1.0 + kDescentSlack)) break;
    alpha *= 0.5;
  }
  if (alpha == 0.0) return BoostResult{w, 0.0};
  return BoostResult{Measure(w.mix(e.sg, alpha).weights(), w.epsilon()), alpha};
}

RestrictedResult restricted_impl(const Measure& w, const Measure& sg, const AtomSet& atoms, const CriterionSpec& spec,
                                 const SolverConfig& cfg, double phi_w) {
  const double eps = w.epsilon();
  const Index n = w.size();
  std::vector<Index> t1;
  std::vector<Index> free;
  Index t2 = 0;
  for (Index i = 0; i < n; ++i) {
    const bool w_cap = w.at_cap(i);
    const bool w_zero = w.at_zero(i);
    const bool s_cap = std::abs(sg[i] - eps) <= kCapBand;
    const bool s_zero = sg[i] <= kZeroBand;
    if (w_cap && s_cap) {
      t1.push_back(i);
    } else if (w_zero && s_zero) {
      ++t2;
    } else {
      free.push_back(i);
    }
  }
  RestrictedResult out{w, static_cast<Index>(t1.size()), t2, static_cast<Index>(free.size()), 0, 0.0};
  if (free.empty()) return out;

  const double mass = 1.0 - eps * static_cast<double>(t1.size());
  if (mass < -1e-12) return out;
  MatrixXd m_fixed = MatrixXd::Zero(atoms.dim(), atoms.dim());
  for (Index i : t1) atoms.add_to(m_fixed, i, eps);
  const AtomSet sub = atoms.subset(free);
  const Index m = sub.size();

  VectorXd x(m);
  for (Index j = 0; j < m; ++j) x[j] = w[free[static_cast<std::size_t>(j)]];
  if (std::abs(x.sum() - mass) > 1e-14 || x.maxCoeff() > eps) x = project_capped_simplex(x, eps, std::max(0.0, mass));

  auto state_at = [&](const VectorXd& y) -> std::optional<InfoState> {
    try {
      return info_state_from_matrix(m_fixed + sub.information(y), spec);
    } catch (const SingularInformation&) {
      return std::nullopt;
    }
  };

  std::optional<InfoState> st = state_at(x);
  if (!st) return out;  // the band-corrected start lost positivity; keep w
  VectorXd lev = sub.trace_products(st->kernel);
  double f = st->phi_value;

  double spread = lev.maxCoeff() - lev.minCoeff();
  double step = spread > 0.0 ? eps / spread : 1.0;
  constexpr double kStepMin = 1e-30;
  // Steps far beyond the one that saturates every coordinate only cost precision.
  const double step_max = step * 1e8;
  int stalls = 0;
  int it = 0;
  double rgap = 0.0;
  for (; it < cfg.inner_max_iters; ++it) {
    rgap = (capped_linear_max(lev, eps, mass) - x.dot(lev)) / f;
    if (rgap <= cfg.inner_tol) break;
    const VectorXd d = project_capped_simplex(x + step * lev, eps, mass) - x;
    const double slope = -lev.dot(d);  // directional derivative of Phi_p along d
    if (!(slope < 0.0)) {
      step = std::max(step * 10.0, kStepMin);
      if (++stalls > 5) break;
      continue;
    }
    double t = 1.0;
    std::optional<InfoState> trial;
    VectorXd xt;
    for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
      xt = x + t * d;
      trial = state_at(xt);
      if (trial && trial->phi_value <= f + 1e-4 * t * slope) break;
      trial.reset();
    }
    if (!trial) break;
    const VectorXd lev_new = sub.trace_products(trial->kernel);
    const VectorXd sx = xt - x;
    const double sty = -sx.dot(lev_new - lev);
    step = sty > 0.0 ? std::clamp(sx.squaredNorm() / sty, kStepMin, step_max) : step_max;
    const double decrease = f - trial->phi_value;
    stalls = decrease <= 1e-15 * f ? stalls + 1 : 0;
    x = xt;
    lev = lev_new;
    f = trial->phi_value;
    st = std::move(trial);
    if (stalls > 5) break;
  }
  out.iterations = it;
  out.restricted_gap = rgap;

  if (!(f <= phi_w * (1.0 + kDescentSlack))) return out;
  VectorXd wn = VectorXd::Zero(n);
  for (Index i : t1) wn[i] = eps;
  for (Index j = 0; j < m; ++j) wn[free[static_cast<std::size_t>(j)]] = x[j];
  out.w = Measure(std::move(wn), eps);
  return out;
}

struct Alg2Outcome {
  Measure w;
  Eval e;
  bool timed_out;
};

// Shared refinement loop; appends to trace and returns the final evaluation.
Alg2Outcome refine_loop(Measure w, Eval e, const AtomSet& atoms, const CriterionSpec& spec, const SolverConfig& cfg,
                        SolveResult& res, const Deadline& dl) {
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    if (e.gap <= cfg.v) break;
    if (dl.expired()) return {std::move(w), std::move(e), true};
    const double phi_before = e.st.phi_value;
    RestrictedResult rr = restricted_impl(w, e.sg, atoms, spec, cfg, phi_before);
    w = rr.w;
    e = evaluate(w, atoms, spec, cfg.pinned);
    ++res.outer_iterations;
    res.trace.push_back({Phase::Refine, e.st.phi_value, e.gap, 0.0, rr.t1, rr.t2, rr.iterations, ms_since(dl.t0)});
    if (e.gap > cfg.v && phi_before - e.st.phi_value < 1e-14 * phi_before) {
      BoostResult b = boost_from(w, e, atoms, spec, cfg);
      if (b.alpha > 0.0) {
        w = b.w_next;
        e = evaluate(w, atoms, spec, cfg.pinned);
      }
      res.trace.push_back({Phase::Safeguard, e.st.phi_value, e.gap, b.alpha, 0, 0, 0, ms_since(dl.t0)});
    }
  }
  return {std::move(w), std::move(e), false};
}

void finish(SolveResult& res, const Measure& w, const Eval& e, const SolverConfig& cfg) {
  res.w = w;
  res.phi = e.st.phi_value;
  res.gap_ratio = e.gap;
  res.leverages = e.lev;
  res.converged = e.gap <= cfg.v;
}

void check_pinned(const SolverConfig& cfg, Index n) {
  for (Index i : cfg.pinned)
    if (i < 0 || i >= n) throw InvalidArgument("pinned index out of range");
  if (static_cast<double>(cfg.pinned.size()) * cfg.epsilon > 1.0 + 1e-12)
    throw InfeasibleEpsilon("pinned points alone exceed unit mass");
}

}  // namespace

SolverConfig SolverConfig::for_sample_size(Index n) {
  if (n < 1) throw InvalidArgument("sample size must be positive");
  SolverConfig c;
  c.epsilon = 1.0 / static_cast<double>(n);
  return c;
}

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw InfeasibleEpsilon("epsilon must be positive");
  if (!(v > 0.0) || !(v0 > 0.0) || !(v0 < 1.0)) throw InvalidArgument("tolerances must satisfy 0 < v and 0 < v0 < 1");
  if (!skip_refine && v > v0) throw InvalidArgument("final tolerance v must not exceed v0 unless refinement is skipped");
  if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("boost cap r must lie in (0, 1)");
  if (!(u > 0.0)) throw InvalidArgument("guard u must be positive");
  if (max_boost_iters < 0 || max_outer_iters < 0 || inner_max_iters < 0) throw InvalidArgument("negative iteration limit");
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Init:
      return "init";
    case Phase::Boost:
      return "boost";
    case Phase::Refine:
      return "refine";
    case Phase::Safeguard:
      return "safeguard";
  }
  return "unknown";
}

GapResult optimality_gap(const Measure& w, const AtomSet& atoms, const CriterionSpec& spec) {
  const InfoState st = build_info_state(atoms, w, spec);
  const VectorXd lev = phi_p_leverages(atoms, st);
  Measure sg = sg_measure(lev, w.epsilon());
  return GapResult{(sg.weights().dot(lev) - st.phi_value) / st.phi_value, std::move(sg)};
}

BoostResult boost_step(const Measure& w, const Measure& sg, const AtomSet& atoms, const CriterionSpec& spec,
                       const SolverConfig& cfg) {
  InfoState st = build_info_state(atoms, w, spec);
  VectorXd lev = phi_p_leverages(atoms, st);
  const double gap = (sg.weights().dot(lev) - st.phi_value) / st.phi_value;
  return boost_from(w, Eval{std::move(st), std::move(lev), Measure(sg.weights(), w.epsilon()), gap}, atoms, spec, cfg);
}

RestrictedResult restricted_minimize(const Measure& w, const Measure& sg, const AtomSet& atoms,
                                     const CriterionSpec& spec, const SolverConfig& cfg) {
  const double phi = criterion_value(atoms, w.weights(), spec);
  return restricted_impl(w, sg, atoms, spec, cfg, phi);
}

SolveResult solve_alg2(const Measure& w0, const AtomSet& atoms, const CriterionSpec& spec, const SolverConfig& cfg) {
  cfg.validate();
  check_pinned(cfg, atoms.size());
  const Deadline dl{Clock::now(), cfg.time_limit_seconds};
  SolveResult res{w0};
  Eval e = evaluate(w0, atoms, spec, cfg.pinned);
  res.trace.push_back({Phase::Init, e.st.phi_value, e.gap, 0.0, 0, 0, 0, ms_since(dl.t0)});
  Alg2Outcome o = refine_loop(w0, std::move(e), atoms, spec, cfg, res, dl);
  res.refine_seconds = ms_since(dl.t0) / 1000.0;
  finish(res, o.w, o.e, cfg);
  res.timed_out = o.timed_out;
  return res;
}

SolveResult solve_hybrid(const AtomSet& atoms, const CriterionSpec& spec, const SolverConfig& cfg) {
  cfg.validate();
  const Index n = atoms.size();
  if (n == 0) throw EmptyInput("empty candidate pool");
  if (static_cast<double>(n) * cfg.epsilon < 1.0 - 1e-12) throw InfeasibleEpsilon("N * epsilon < 1");
  if (atoms.dim() > n) throw SingularInformation("fewer candidate points than parameters");
  check_pinned(cfg, n);
  const Deadline dl{Clock::now(), cfg.time_limit_seconds};

  // Start from the SG measure of the uniform measure.
  const Measure uniform(VectorXd::Constant(n, 1.0 / static_cast<double>(n)), cfg.epsilon);
  const InfoState st_u = build_info_state(atoms, uniform, spec);
  const VectorXd scores_u = ranking_scores(phi_p_leverages(atoms, st_u), cfg.pinned);
  Measure w = psg_measure(scores_u, cfg.epsilon, atoms, uniform);

  SolveResult res{w};
  Eval e = evaluate(w, atoms, spec, cfg.pinned);
  res.trace.push_back({Phase::Init, e.st.phi_value, e.gap, 0.0, 0, 0, 0, ms_since(dl.t0)});

  // Boost until the gap drops to v0.
  for (int it = 0; it < cfg.max_boost_iters && e.gap > cfg.v0; ++it) {
    if (dl.expired()) {
      res.timed_out = true;
      break;
    }
    BoostResult b = boost_from(w, e, atoms, spec, cfg);
    ++res.boost_iterations;
    if (b.alpha == 0.0) break;  // no descent along the SG direction; hand over to the refinement
    w = std::move(b.w_next);
    e = evaluate(w, atoms, spec, cfg.pinned);
    res.trace.push_back({Phase::Boost, e.st.phi_value, e.gap, b.alpha, 0, 0, 0, ms_since(dl.t0)});
  }
  res.boost_seconds = ms_since(dl.t0) / 1000.0;

  // Refine from the boosted measure.
  if (!cfg.skip_refine && !res.timed_out) {
    Alg2Outcome o = refine_loop(w, std::move(e), atoms, spec, cfg, res, dl);
    w = std::move(o.w);
    e = std::move(o.e);
    res.timed_out = o.timed_out;
  }
  res.refine_seconds = ms_since(dl.t0) / 1000.0 - res.boost_seconds;
  finish(res, w, e, cfg);
  if (cfg.skip_refine) res.converged = e.gap <= std::max(cfg.v, cfg.v0);
  return res;
}

SolveResult solve_d_alg1(const AtomSet& atoms, const SolverConfig& cfg) {
  cfg.validate();
  if (!atoms.is_rank_one()) throw InvalidArgument("the leverage solver requires rank-one atoms");
  const Index n = atoms.size();
  const Index k = atoms.dim();
  if (static_cast<double>(n) * cfg.epsilon < 1.0 - 1e-12) throw InfeasibleEpsilon("N * epsilon < 1");
  check_pinned(cfg, n);
  const Deadline dl{Clock::now(), cfg.time_limit_seconds};
  const CriterionSpec dspec(0.0);

  struct DEval {
    MatrixXd m;
    VectorXd lev;
    Measure sg;
    double phi;
    double trace;  // Tr(M(w)^{-1} M(sg))
  };
  auto d_eval = [&](const Measure& w) {
    MatrixXd m = atoms.information(w.weights());
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw SingularInformation("information matrix is not positive definite");
    const MatrixXd m_inv = llt.solve(MatrixXd::Identity(k, k));
    VectorXd lev = raw_leverages(atoms, m_inv);
    Measure sg = psg_measure(ranking_scores(lev, cfg.pinned), w.epsilon(), atoms, w);
    const double tr = sg.weights().dot(lev);
    const VectorXd diag = llt.matrixLLT().diagonal();
    const double logdet = 2.0 * diag.array().log().sum();
    return DEval{std::move(m), std::move(lev), std::move(sg), std::exp(-logdet / static_cast<double>(k)), tr};
  };

  // Initial measure: top leverages of the whole pool at weight epsilon.
  const Measure uniform(VectorXd::Constant(n, 1.0 / static_cast<double>(n)), cfg.epsilon);
  const MatrixXd m_all = atoms.information(uniform.weights());
  Eigen::LLT<MatrixXd> llt_all(m_all);
  if (llt_all.info() != Eigen::Success) throw SingularInformation("pool information matrix is singular");
  const VectorXd lev_all = raw_leverages(atoms, llt_all.solve(MatrixXd::Identity(k, k)));
  Measure w = psg_measure(ranking_scores(lev_all, cfg.pinned), cfg.epsilon, atoms, uniform);

  SolveResult res{w};
  DEval e = d_eval(w);
  const double kd = static_cast<double>(k);
  auto gap_of = [&](const DEval& de) { return std::max(0.0, de.trace / kd - 1.0); };
  res.trace.push_back({Phase::Init, e.phi, gap_of(e), 0.0, 0, 0, 0, ms_since(dl.t0)});
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    if (e.trace < kd * (1.0 + cfg.v)) break;
    if (dl.expired()) {
      res.timed_out = true;
      break;
    }
    const double phi_before = e.phi;
    RestrictedResult rr = restricted_impl(w, e.sg, atoms, dspec, cfg, phi_before);
    w = rr.w;
    e = d_eval(w);
    ++res.outer_iterations;
    res.trace.push_back({Phase::Refine, e.phi, gap_of(e), 0.0, rr.t1, rr.t2, rr.iterations, ms_since(dl.t0)});
    if (e.trace >= kd * (1.0 + cfg.v) && phi_before - e.phi < 1e-14 * phi_before) {
      BoostResult b = boost_step(w, e.sg, atoms, dspec, cfg);
      if (b.alpha > 0.0) {
        w = b.w_next;
        e = d_eval(w);
      }
      res.trace.push_back({Phase::Safeguard, e.phi, gap_of(e), b.alpha, 0, 0, 0, ms_since(dl.t0)});
    }
  }
  res.refine_seconds = ms_since(dl.t0) / 1000.0;
  res.w = w;
  res.phi = e.phi;
  res.gap_ratio = gap_of(e);
  res.leverages = e.lev;
  res.converged = e.trace < kd * (1.0 + cfg.v);
  return res;
}

EfficiencyBounds efficiency_bounds(const Measure& candidate, const Measure& solved, const AtomSet& atoms,
                                   const CriterionSpec& spec) {
  const double phi_cand = criterion_value(atoms, candidate.weights(), spec);
  const InfoState st = build_info_state(atoms, solved, spec);
  const VectorXd lev = phi_p_leverages(atoms, st);
  const Measure sg = sg_measure(lev, solved.epsilon());
  const double eta_sg = eta(sg.weights(), st, lev);
  return EfficiencyBounds{st.phi_value / phi_cand, (st.phi_value + eta_sg) / phi_cand,
                          -eta_sg / st.phi_value};
}

}  // namespace bmal
