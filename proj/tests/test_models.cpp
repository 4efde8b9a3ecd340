#include <doctest.h>

#include <cmath>
#include <limits>

#include "bmal/errors.hpp"
#include "bmal/models.hpp"
#include "oracles.hpp"

using namespace bmal;

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Cumulative-logit category probabilities written out directly.
VectorXd probs(const VectorXd& z, const VectorXd& beta, const VectorXd& cuts) {
  const Index j = cuts.size() + 1;
  VectorXd p(j);
  const double lin = z.dot(beta);
  for (Index c = 0; c < j; ++c) {
    const double hi = c < j - 1 ? logistic(cuts[c] - lin) : 1.0;
    const double lo = c > 0 ? logistic(cuts[c - 1] - lin) : 0.0;
    p[c] = hi - lo;
  }
  return p;
}

// Expected information as minus the finite-difference Hessian of
// sum_j pi_j(theta0) log pi_j(theta), the expectation taken exactly.
MatrixXd fd_information(const VectorXd& z, const VectorXd& beta, const VectorXd& cuts) {
  const Index d = beta.size();
  const Index k = d + cuts.size();
  VectorXd theta0(k);
  theta0 << beta, cuts;
  const VectorXd p0 = probs(z, beta, cuts);
  const auto f = [&](const VectorXd& t) {
    const VectorXd p = probs(z, t.head(d), t.tail(k - d));
    return p0.dot(p.array().log().matrix());
  };
  const double h = 1e-4;
  MatrixXd hess(k, k);
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) {
      VectorXd pp = theta0, pm = theta0, mp = theta0, mm = theta0;
      pp[a] += h, pp[b] += h;
      pm[a] += h, pm[b] -= h;
      mp[a] -= h, mp[b] += h;
      mm[a] -= h, mm[b] -= h;
      hess(a, b) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
    }
  }
  return -hess;
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("logistic atoms at zero coefficients halve the features") {
    Rng rng(71);
    const MatrixXd z = oracle::gaussian(10, 3, rng);
    const AtomSet atoms = logistic_atoms(z, LogisticModelSpec{VectorXd::Zero(3), false});
    CHECK((atoms.vectors() - 0.5 * z).norm() < 1e-15);
    const AtomSet with_icpt = logistic_atoms(z, LogisticModelSpec{VectorXd::Zero(4), true});
    CHECK(with_icpt.dim() == 4);
    CHECK((with_icpt.vectors().col(0) - VectorXd::Constant(10, 0.5)).norm() < 1e-15);
  }

  TEST_CASE("logistic atoms vanish under saturation") {
    MatrixXd z(1, 2);
    z << 400, 1;
    VectorXd beta(2);
    beta << 1, 0;
    const AtomSet atoms = logistic_atoms(z, LogisticModelSpec{beta, false});
    CHECK(atoms.vectors().norm() < 1e-80);
    CHECK(std::isfinite(atoms.vectors().norm()));
  }

  TEST_CASE("logistic atoms reproduce the Bernoulli Fisher information") {
    Rng rng(72);
    for (int rep = 0; rep < 50; ++rep) {
      const MatrixXd z = oracle::gaussian(5, 4, rng);
      VectorXd beta(4);
      for (Index j = 0; j < 4; ++j) beta[j] = rng.normal();
      const AtomSet atoms = logistic_atoms(z, LogisticModelSpec{beta, false});
      for (Index i = 0; i < 5; ++i) {
        const double t = z.row(i).dot(beta);
        // p (1 - p) without the cancellation in 1 - p
        const double var = logistic(t) * logistic(-t);
        const MatrixXd fisher = var * z.row(i).transpose() * z.row(i);
        const MatrixXd got = atoms.atom(i).to_matrix();
        CHECK((got - fisher).cwiseAbs().maxCoeff() <= 8 * std::numeric_limits<double>::epsilon() * fisher.cwiseAbs().maxCoeff());
        CHECK(atoms.vectors().row(i).norm() <= 0.5 * z.row(i).norm() * (1 + 1e-15));
      }
    }
  }

  TEST_CASE("linear atoms and design matrix") {
    MatrixXd z(2, 2);
    z << 1, 2, 3, 4;
    CHECK(linear_atoms(z).vectors() == z);
    const MatrixXd d = design_matrix(z, true);
    CHECK(d.cols() == 3);
    CHECK(d.col(0) == VectorXd::Ones(2));
    CHECK(d.rightCols(2) == z);
    CHECK(design_matrix(z, false) == z);
  }

  TEST_CASE("category probabilities sum to one") {
    Rng rng(73);
    for (int rep = 0; rep < 50; ++rep) {
      CumulativeLinkSpec spec;
      spec.beta = VectorXd(2);
      spec.beta << rng.normal(), rng.normal();
      spec.cuts = VectorXd(4);
      spec.cuts << -2 + rng.uniform(), -0.5 + rng.uniform(), 1 + rng.uniform(), 2.5 + rng.uniform();
      VectorXd z(2);
      z << rng.normal(), rng.normal();
      const VectorXd p = category_probabilities(z, spec);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(p.minCoeff() > 0.0);
      CHECK((p - probs(z, spec.beta, spec.cuts)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  TEST_CASE("cumulative link information at the three-category example") {
    CumulativeLinkSpec spec;
    spec.beta = VectorXd::Constant(1, 0.5);
    spec.cuts = VectorXd(2);
    spec.cuts << -1, 1;
    const VectorXd z = VectorXd::Zero(1);
    const MatrixXd m = cumlink_atom(z, spec).to_matrix();
    CHECK(m.rows() == 3);
    CHECK((m - fd_information(z, spec.beta, spec.cuts)).cwiseAbs().maxCoeff() < 1e-5);
  }

  TEST_CASE("cumulative link information matches the finite-difference oracle") {
    Rng rng(74);
    for (int rep = 0; rep < 50; ++rep) {
      const Index d = 1 + static_cast<Index>(rng.below(3));
      const Index j = 2 + static_cast<Index>(rng.below(4));
      CumulativeLinkSpec spec;
      spec.beta = VectorXd(d);
      for (Index i = 0; i < d; ++i) spec.beta[i] = 0.7 * rng.normal();
      spec.cuts = VectorXd(j - 1);
      double c = -1.5 + 0.5 * rng.normal();
      for (Index i = 0; i < j - 1; ++i) {
        spec.cuts[i] = c;
        c += 0.4 + rng.uniform();
      }
      VectorXd z(d);
      for (Index i = 0; i < d; ++i) z[i] = rng.normal();
      const MatrixXd m = cumlink_atom(z, spec).to_matrix();
      const MatrixXd oracle_m = fd_information(z, spec.beta, spec.cuts);
      CHECK((m - oracle_m).cwiseAbs().maxCoeff() < 1e-5);
      CHECK((m - m.transpose()).norm() == 0.0);
      CHECK(oracle::eigenvalues(m).minCoeff() > -1e-12);
    }
  }

  TEST_CASE("two categories reduce to logistic information") {
    Rng rng(75);
    for (int rep = 0; rep < 30; ++rep) {
      CumulativeLinkSpec spec;
      spec.beta = VectorXd(3);
      for (Index i = 0; i < 3; ++i) spec.beta[i] = rng.normal();
      spec.cuts = VectorXd::Constant(1, rng.normal());
      VectorXd z(3);
      for (Index i = 0; i < 3; ++i) z[i] = rng.normal();
      // P(y = 0) = logistic(theta - z^T beta): a logistic regression on (-z, 1).
      VectorXd reg(4);
      reg << -z, 1.0;
      VectorXd coef(4);
      coef << spec.beta, spec.cuts[0];
      MatrixXd row(1, 4);
      row.row(0) = reg.transpose();
      const MatrixXd expected = logistic_atoms(row, LogisticModelSpec{coef, false}).atom(0).to_matrix();
      const MatrixXd got = cumlink_atom(z, spec).to_matrix();
      CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("two generic covariates give full-rank cumulative link information") {
    CumulativeLinkSpec spec;
    spec.beta = VectorXd::Constant(1, 0.3);
    spec.cuts = VectorXd(2);
    spec.cuts << -0.5, 0.8;
    MatrixXd z(2, 1);
    z << -0.7, 1.2;
    const AtomSet atoms = cumlink_atoms(z, spec);
    CHECK(atoms.dim() == 3);
    CHECK_FALSE(atoms.is_rank_one());
    const MatrixXd m = atoms.information(VectorXd::Constant(2, 0.5));
    CHECK(oracle::eigenvalues(m).minCoeff() > 1e-6);
    // A single point already has rank above one.
    Eigen::FullPivLU<MatrixXd> lu(atoms.atom(0).to_matrix());
    CHECK(lu.rank() == 2);
  }

  TEST_CASE("cumulative link errors") {
    CumulativeLinkSpec spec;
    spec.beta = VectorXd::Constant(1, 1.0);
    spec.cuts = VectorXd(2);
    spec.cuts << 1, 0;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    spec.cuts << 0, 1e-13;
    CHECK_THROWS_AS(cumlink_atom(VectorXd::Zero(1), spec), DegenerateCategory);
    spec.cuts << 0, 1;
    CHECK_THROWS_AS(cumlink_atom(VectorXd::Zero(2), spec), DimensionMismatch);
  }

  TEST_CASE("generic atoms") {
    std::vector<MatrixXd> eye(3, MatrixXd::Identity(2, 2));
    CHECK(generic_atoms(eye).information(VectorXd::Constant(3, 1.0 / 3)).isApprox(MatrixXd::Identity(2, 2)));
    MatrixXd a(2, 2);
    a << 2, 1, 1 + 1e-12, 3;
    const MatrixXd sym = generic_atoms({a}).atom(0).to_matrix();
    CHECK(sym(0, 1) == sym(1, 0));
    CHECK(sym(0, 1) == doctest::Approx(1.0 + 5e-13));
    MatrixXd neg = MatrixXd::Zero(2, 2);
    neg.diagonal() << 1, -0.1;
    CHECK_THROWS_AS(generic_atoms({neg}), NotPSD);
    CHECK_THROWS_AS(generic_atoms({MatrixXd::Identity(2, 2), MatrixXd::Identity(3, 3)}), DimensionMismatch);
    Rng rng(76);
    const MatrixXd b = oracle::gaussian(3, 3, rng);
    const MatrixXd psd = b * b.transpose();
    CHECK(generic_atoms({psd}).atom(0).to_matrix() == psd);
  }

  TEST_CASE("standardization uses the population standard deviation") {
    MatrixXd z(3, 2);
    z << 1, 1, 1, 2, 1, 3;
    const Standardized s = standardize_features(z, {true, false});
    const double sd = std::sqrt(2.0 / 3.0);
    CHECK(s.z.col(0) == VectorXd::Ones(3));
    CHECK(s.z(0, 1) == doctest::Approx(-1.0 / sd));
    CHECK(s.z(1, 1) == doctest::Approx(0.0));
    CHECK(s.z(2, 1) == doctest::Approx(1.0 / sd));
    CHECK(s.means[1] == doctest::Approx(2.0));
    CHECK(s.sds[1] == doctest::Approx(sd));
    CHECK(s.sds[0] == 1.0);
    const Standardized again = standardize_features(s.z, {true, false});
    CHECK(again.means[1] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(again.sds[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(standardize_features(z), ZeroVariance);
  }
}
