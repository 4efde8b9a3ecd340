#include <doctest.h>

#include <cmath>
#include <limits>

#include "bmal/criteria.hpp"
#include "bmal/errors.hpp"
#include "bmal/measures.hpp"
#include "bmal/solvers.hpp"
#include "oracles.hpp"

using namespace bmal;

namespace {

MatrixXd identity_pool(Index k) { return MatrixXd::Identity(k, k); }

SolverConfig config(double eps, double v = 1e-6) {
  SolverConfig cfg;
  cfg.epsilon = eps;
  cfg.v = v;
  cfg.v0 = std::max(v, 1e-3);
  return cfg;
}

void check_monotone(const SolveTrace& trace) {
  for (std::size_t t = 1; t < trace.size(); ++t) CHECK(trace[t].phi <= trace[t - 1].phi * (1.0 + 1e-12));
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("configuration validation") {
    SolverConfig cfg = SolverConfig::for_sample_size(20);
    CHECK(cfg.epsilon == doctest::Approx(0.05));
    CHECK_NOTHROW(cfg.validate());
    cfg.v = 1e-2;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg.skip_refine = true;
    CHECK_NOTHROW(cfg.validate());
    SolverConfig bad_r = SolverConfig::for_sample_size(20);
    bad_r.r = 1.0;
    CHECK_THROWS_AS(bad_r.validate(), InvalidArgument);
    SolverConfig bad_u = SolverConfig::for_sample_size(20);
    bad_u.u = 0.0;
    CHECK_THROWS_AS(bad_u.validate(), InvalidArgument);
    CHECK_THROWS_AS(SolverConfig::for_sample_size(0), InvalidArgument);
  }

  TEST_CASE("gap is zero at a symmetric optimum and positive at uniform") {
    const AtomSet unit = AtomSet::rank_one(identity_pool(2));
    const GapResult g = optimality_gap(Measure(VectorXd::Constant(2, 0.5), 0.5), unit, CriterionSpec(0.0));
    CHECK(std::abs(g.gap_ratio) < 1e-14);

    Rng rng(41);
    const AtomSet pool = AtomSet::rank_one(oracle::gaussian(100, 3, rng));
    const Measure u(VectorXd::Constant(100, 0.01), 0.1);
    for (double p : {0.0, 1.0}) {
      const GapResult gu = optimality_gap(u, pool, CriterionSpec(p));
      CHECK(gu.gap_ratio > 0.0);
    }
    for (int rep = 0; rep < 30; ++rep) {
      const Measure w(oracle::random_capped(100, 0.05, rng), 0.05);
      CHECK(optimality_gap(w, pool, CriterionSpec(rep % 2 ? 1.0 : 0.0)).gap_ratio >= -1e-12);
    }
  }

  TEST_CASE("boost step follows the damped Newton formula") {
    const AtomSet unit = AtomSet::rank_one(identity_pool(2));
    const Measure opt(VectorXd::Constant(2, 0.5), 0.5);
    const BoostResult still = boost_step(opt, opt, unit, CriterionSpec(0.0), config(0.5));
    CHECK(still.alpha == 0.0);
    CHECK(still.w_next.weights() == opt.weights());

    Rng rng(42);
    int exact = 0;
    for (int rep = 0; rep < 40; ++rep) {
      const AtomSet pool = AtomSet::rank_one(oracle::gaussian(30, 3, rng));
      const CriterionSpec spec(rep % 3 == 0 ? 0.0 : rep % 3 == 1 ? 1.0 : 2.0);
      const SolverConfig cfg = config(0.1);
      const Measure w(oracle::random_capped(30, 0.1, rng), 0.1);
      const GapResult g = optimality_gap(w, pool, spec);
      const BoostResult b = boost_step(w, g.sg, pool, spec, cfg);
      const double e = eta(g.sg, w, pool, spec);
      const double t = tau(g.sg, w, pool, spec);
      const double expected = std::min(cfg.r, std::max(0.0, -e / (t + cfg.u)));
      // Either the formula value or one of its halvings.
      double a = expected;
      bool matched = false;
      for (int h = 0; h <= 20 && !matched; ++h, a *= 0.5) matched = std::abs(b.alpha - a) <= 1e-3 * a;
      CHECK(matched);
      if (std::abs(b.alpha - expected) <= 1e-3 * expected) ++exact;
      CHECK((b.w_next.weights() - ((1 - b.alpha) * w.weights() + b.alpha * g.sg.weights())).norm() < 1e-14);
      CHECK(b.w_next.weights().maxCoeff() <= 0.1 + 1e-12);
      CHECK(criterion_value(pool, b.w_next.weights(), spec) <= criterion_value(pool, w.weights(), spec) * (1 + 1e-12));
    }
    CHECK(exact > 20);
  }

  TEST_CASE("restricted minimization matches a grid search") {
    MatrixXd x(3, 2);
    x << 1, 0, 0, 1, std::sqrt(0.5), std::sqrt(0.5);
    const AtomSet atoms = AtomSet::rank_one(x);
    const CriterionSpec spec(0.0);
    const Measure w(VectorXd::Constant(3, 1.0 / 3), 0.5);
    const GapResult g = optimality_gap(w, atoms, spec);
    const RestrictedResult r = restricted_minimize(w, g.sg, atoms, spec, config(0.5));
    CHECK(r.t1 == 0);
    CHECK(r.t2 == 0);
    // By the e1 <-> e2 symmetry the optimum has w1 = w2 = a, w3 = 1 - 2a.
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 250000; ++i) {
      const double a = 0.25 + 0.25 * i / 250000.0;
      const Eigen::Vector3d ww(a, a, 1 - 2 * a);
      best = std::min(best, oracle::phi(oracle::information(x, ww), MatrixXd(), 0.0));
    }
    const double got = criterion_value(atoms, r.w.weights(), spec);
    CHECK(got == doctest::Approx(best).epsilon(1e-6));
    CHECK(got <= best * (1 + 1e-9));
  }

  TEST_CASE("restricted minimization keeps fixed coordinates and never ascends") {
    const AtomSet unit = AtomSet::rank_one(identity_pool(2));
    const Measure opt(VectorXd::Constant(2, 0.5), 0.5);
    const RestrictedResult same = restricted_minimize(opt, opt, unit, CriterionSpec(0.0), config(0.5));
    CHECK(same.free == 0);
    CHECK(same.w.weights() == opt.weights());

    Rng rng(43);
    for (int rep = 0; rep < 100; ++rep) {
      const Index n = 12 + static_cast<Index>(rng.below(20));
      const AtomSet pool = AtomSet::rank_one(oracle::gaussian(n, 3, rng));
      const CriterionSpec spec(std::vector<double>{0.0, 0.5, 1.0, 2.0}[static_cast<std::size_t>(rep % 4)]);
      const double eps = 0.2;
      // Start from a point with some coordinates at the cap and some at zero.
      VectorXd v = VectorXd::Zero(n);
      for (Index i = 0; i < 3; ++i) v[i] = eps;
      for (Index i = 3; i < n - 3; ++i) v[i] = (1 - 3 * eps) / static_cast<double>(n - 6);
      const Measure w(v, eps);
      const GapResult g = optimality_gap(w, pool, spec);
      const RestrictedResult r = restricted_minimize(w, g.sg, pool, spec, config(eps));
      CHECK(criterion_value(pool, r.w.weights(), spec) <= criterion_value(pool, w.weights(), spec) * (1 + 1e-12));
      for (Index i = 0; i < n; ++i) {
        if (w.at_cap(i) && g.sg.at_cap(i)) CHECK(r.w[i] == doctest::Approx(eps));
        if (w.at_zero(i) && g.sg.at_zero(i)) CHECK(r.w[i] == 0.0);
      }
    }
  }

  TEST_CASE("leverage solver reaches the gap tolerance from any start") {
    Rng rng(44);
    const MatrixXd x = oracle::gaussian(50, 3, rng);
    const AtomSet pool = AtomSet::rank_one(x);
    const CriterionSpec spec(1.0);
    const SolverConfig cfg = config(0.1, 1e-6);
    const SolveResult first = solve_alg2(Measure(VectorXd::Constant(50, 0.02), 0.1), pool, spec, cfg);
    CHECK(first.converged);
    CHECK(first.gap_ratio <= 1e-6);
    check_monotone(first.trace);
    for (int start = 0; start < 5; ++start) {
      const SolveResult r = solve_alg2(Measure(oracle::random_capped(50, 0.1, rng), 0.1), pool, spec, cfg);
      CHECK(r.gap_ratio <= 1e-6);
      CHECK(r.phi == doctest::Approx(first.phi).epsilon(1e-6));
      check_monotone(r.trace);
    }
    // Restarting at the optimum stops at once.
    const SolveResult again = solve_alg2(first.w, pool, spec, cfg);
    CHECK(again.outer_iterations <= 1);
    CHECK(again.gap_ratio <= 1e-6);
  }

  TEST_CASE("hybrid solver on an orthonormal pool returns uniform weights") {
    const AtomSet unit = AtomSet::rank_one(identity_pool(4));
    const SolveResult r = solve_hybrid(unit, CriterionSpec(0.0), config(0.25));
    CHECK((r.w.weights() - VectorXd::Constant(4, 0.25)).norm() < 1e-14);
    CHECK(std::abs(r.gap_ratio) < 1e-12);
    const SolveResult d = solve_d_alg1(unit, config(0.25));
    CHECK((d.w.weights() - VectorXd::Constant(4, 0.25)).norm() < 1e-14);
    CHECK(d.outer_iterations <= 1);
  }

  TEST_CASE("hybrid solver errors") {
    const AtomSet unit = AtomSet::rank_one(identity_pool(4));
    CHECK_THROWS_AS(solve_hybrid(unit, CriterionSpec(0.0), config(0.2)), InfeasibleEpsilon);
    const AtomSet wide = AtomSet::rank_one(MatrixXd::Identity(2, 3));
    CHECK_THROWS_AS(solve_hybrid(wide, CriterionSpec(0.0), config(0.5)), SingularInformation);
    std::vector<MatrixXd> mats(3, MatrixXd::Identity(2, 2));
    CHECK_THROWS_AS(solve_d_alg1(AtomSet::full(mats), config(0.5)), InvalidArgument);
  }

  TEST_CASE("determinant solver exits inside the equivalence band") {
    Rng rng(45);
    const MatrixXd x = oracle::gaussian(200, 5, rng);
    const AtomSet pool = AtomSet::rank_one(x);
    const double v = 1e-6;
    const SolveResult r = solve_d_alg1(pool, config(0.05, v));
    CHECK(r.converged);
    const VectorXd w = r.w.weights();
    const MatrixXd m_inv = oracle::information(x, w).inverse();
    VectorXd raw(200);
    for (Index i = 0; i < 200; ++i) raw[i] = x.row(i) * m_inv * x.row(i).transpose();
    const Measure sg = sg_measure(raw, 0.05);
    const double tr = (m_inv * oracle::information(x, sg.weights())).trace();
    CHECK(tr >= 5.0 * (1 - 1e-12));
    CHECK(tr <= 5.0 * (1 + v));
  }

  TEST_CASE("determinant solver agrees with the hybrid solver") {
    Rng rng(46);
    for (int rep = 0; rep < 20; ++rep) {
      const AtomSet pool = AtomSet::rank_one(oracle::gaussian(80, 4, rng));
      const SolverConfig cfg = config(0.05, 1e-8);
      const double a = solve_d_alg1(pool, cfg).phi;
      const double b = solve_hybrid(pool, CriterionSpec(0.0), cfg).phi;
      CHECK(a == doctest::Approx(b).epsilon(1e-6));
    }
  }

  TEST_CASE("solution structure: trichotomy, monotone weights and certificate") {
    Rng rng(47);
    for (int rep = 0; rep < 10; ++rep) {
      const AtomSet pool = AtomSet::rank_one(oracle::gaussian(100, 5, rng));
      const CriterionSpec spec(rep % 2 ? 1.0 : 0.0);
      const SolveResult r = solve_hybrid(pool, spec, config(0.1, 1e-8));
      CHECK(r.converged);
      check_monotone(r.trace);
      const VectorXd lev = r.leverages / r.phi;
      CHECK(trichotomy_check(r.w, lev, 1e-5).passed);
      for (Index i = 0; i < 100; ++i)
        for (Index j = 0; j < 100; ++j)
          if (lev[i] > lev[j] + 1e-4) CHECK(r.w[i] >= r.w[j] - 1e-9);
      // A rough solve is certified against the fine one.
      const SolveResult rough = solve_hybrid(pool, spec, config(0.1, 1e-3));
      CHECK(r.phi >= (1 - rough.gap_ratio) * rough.phi * (1 - 1e-12));
      CHECK(rough.phi >= r.phi * (1 - 1e-12));
    }
  }

  TEST_CASE("efficiency bounds") {
    Rng rng(48);
    const AtomSet pool = AtomSet::rank_one(oracle::gaussian(40, 3, rng));
    const CriterionSpec spec(0.0);
    const SolveResult r = solve_hybrid(pool, spec, config(0.1, 1e-9));
    const EfficiencyBounds self = efficiency_bounds(r.w, r.w, pool, spec);
    CHECK(self.ratio == doctest::Approx(1.0));
    CHECK(self.certified_lower_bound == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(self.certified_lower_bound <= 1.0);
  }

  TEST_CASE("relaxation bound and certificate against subset enumeration") {
    Rng rng(49);
    for (int rep = 0; rep < 10; ++rep) {
      const MatrixXd x = oracle::gaussian(8, 2, rng);
      const AtomSet pool = AtomSet::rank_one(x);
      for (double p : {0.0, 1.0}) {
        const CriterionSpec spec(p);
        const SolveResult r = solve_hybrid(pool, spec, config(1.0 / 3, 1e-9));
        double best = std::numeric_limits<double>::infinity();
        std::vector<std::vector<Index>> subsets;
        oracle::for_each_subset(8, 3, [&](const std::vector<Index>& s) {
          subsets.push_back(s);
          const MatrixXd m = oracle::information(x, oracle::subset_weights(8, s));
          if (std::abs(m.determinant()) > 1e-12) best = std::min(best, oracle::phi(m, MatrixXd(), p));
        });
        CHECK(subsets.size() == 56);
        CHECK(r.phi <= best * (1 + 1e-9));
        for (const auto& s : subsets) {
          const MatrixXd m = oracle::information(x, oracle::subset_weights(8, s));
          if (std::abs(m.determinant()) <= 1e-12) continue;
          const EfficiencyBounds b = efficiency_bounds(measure_of_sample(SampleSet(s), 8), r.w, pool, spec);
          const double truth = best / oracle::phi(m, MatrixXd(), p);
          CHECK(b.certified_lower_bound <= truth * (1 + 1e-9));
          CHECK(truth <= 1.0 + 1e-12);
        }
      }
    }
  }

  TEST_CASE("solver runs are deterministic") {
    Rng rng(50);
    const AtomSet pool = AtomSet::rank_one(oracle::gaussian(300, 4, rng));
    const SolveResult a = solve_hybrid(pool, CriterionSpec(1.0), config(0.02));
    const SolveResult b = solve_hybrid(pool, CriterionSpec(1.0), config(0.02));
    CHECK(a.w.weights() == b.w.weights());
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t t = 0; t < a.trace.size(); ++t) {
      CHECK(a.trace[t].phi == b.trace[t].phi);
      CHECK(a.trace[t].alpha == b.trace[t].alpha);
      CHECK(a.trace[t].t1 == b.trace[t].t1);
    }
  }

  TEST_CASE("pinned indices stay at the cap") {
    Rng rng(51);
    const AtomSet pool = AtomSet::rank_one(oracle::gaussian(60, 3, rng));
    SolverConfig cfg = config(0.1);
    cfg.pinned = {5, 17, 33};
    const SolveResult r = solve_hybrid(pool, CriterionSpec(0.0), cfg);
    for (Index i : cfg.pinned) CHECK(r.w[i] == doctest::Approx(0.1));
    CHECK(r.converged);
  }

  TEST_CASE("boost-only runs stop at v0") {
    Rng rng(52);
    const AtomSet pool = AtomSet::rank_one(oracle::gaussian(200, 4, rng));
    SolverConfig cfg = config(0.02);
    cfg.skip_refine = true;
    const SolveResult r = solve_hybrid(pool, CriterionSpec(0.0), cfg);
    CHECK(r.gap_ratio <= cfg.v0);
    CHECK(r.outer_iterations == 0);
  }
}
