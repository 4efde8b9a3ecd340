#include "bmal/models.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "bmal/errors.hpp"

namespace bmal {

double link_cdf(Link link, double t) {
  switch (link) {
    case Link::Logit:
      return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
  }
  return 0.0;
}

double link_density(Link link, double t) {
  switch (link) {
    case Link::Logit: {
      const double e = std::exp(-std::abs(t));
      return e / ((1.0 + e) * (1.0 + e));
    }
  }
  return 0.0;
}

void CumulativeLinkSpec::validate() const {
  if (cuts.size() < 1) throw InvalidArgument("cumulative link model needs at least two categories");
  if (!beta.allFinite() || !cuts.allFinite()) throw InvalidArgument("non-finite cumulative link parameters");
  for (Index j = 1; j < cuts.size(); ++j)
    if (!(cuts[j] > cuts[j - 1])) throw InvalidArgument("cutpoints must be strictly increasing");
}

VectorXd category_probabilities(const VectorXd& z, const CumulativeLinkSpec& spec) {
  const Index jn = spec.categories();
  const double eta = z.dot(spec.beta);
  VectorXd pi(jn);
  double prev = 0.0;
  for (Index j = 0; j < jn; ++j) {
    const double gamma = j + 1 < jn ? link_cdf(spec.link, spec.cuts[j] - eta) : 1.0;
    pi[j] = gamma - prev;
    prev = gamma;
  }
  return pi;
}

MatrixXd design_matrix(const MatrixXd& z, bool add_intercept) {
  if (!add_intercept) return z;
  MatrixXd out(z.rows(), z.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(z.cols()) = z;
  return out;
}

AtomSet logistic_atoms(const MatrixXd& z, const LogisticModelSpec& spec) {
  MatrixXd x = design_matrix(z, spec.add_intercept);
  if (spec.beta.size() != x.cols())
    throw DimensionMismatch("beta has " + std::to_string(spec.beta.size()) + " entries for " + std::to_string(x.cols()) +
                            " regressors");
  if (!spec.beta.allFinite()) throw InvalidArgument("beta must be finite");
  const VectorXd eta = x * spec.beta;
  for (Index i = 0; i < x.rows(); ++i) {
    // p (1 - p) = density of the logistic distribution at eta
    x.row(i) *= std::sqrt(link_density(Link::Logit, eta[i]));
  }
  return AtomSet::rank_one(std::move(x));
}

AtomSet linear_atoms(const MatrixXd& z) { return AtomSet::rank_one(z); }

InfoAtom cumlink_atom(const VectorXd& z, const CumulativeLinkSpec& spec) {
  spec.validate();
  const Index d = spec.beta.size();
  if (z.size() != d) throw DimensionMismatch("covariate has " + std::to_string(z.size()) + " entries, beta has " + std::to_string(d));
  const Index jn = spec.categories();
  const Index k = d + jn - 1;
  const double eta = z.dot(spec.beta);
  const VectorXd pi = category_probabilities(z, spec);

  // f_j = (h^{-1})'(theta_j - z^T beta), with f_0 = f_J = 0.
  VectorXd f = VectorXd::Zero(jn + 1);
  for (Index j = 1; j < jn; ++j) f[j] = link_density(spec.link, spec.cuts[j - 1] - eta);

  MatrixXd m = MatrixXd::Zero(k, k);
  VectorXd a(k);
  for (Index j = 1; j <= jn; ++j) {
    const double p = pi[j - 1];
    if (!(p > kCategoryFloor)) {
      throw DegenerateCategory("category " + std::to_string(j) + " has probability " + std::to_string(p) +
                               " at this covariate");
    }
    // d pi_j / d beta = -(f_j - f_{j-1}) z ; d pi_j / d theta = f_j e_j - f_{j-1} e_{j-1}
    a.setZero();
    a.head(d) = -(f[j] - f[j - 1]) * z;
    if (j < jn) a[d + j - 1] = f[j];
    if (j > 1) a[d + j - 2] = -f[j - 1];
    m.noalias() += (a * a.transpose()) / p;
  }
  return InfoAtom{MatrixXd(0.5 * (m + m.transpose()))};
}

AtomSet cumlink_atoms(const MatrixXd& z, const CumulativeLinkSpec& spec) {
  std::vector<MatrixXd> ms;
  ms.reserve(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) ms.push_back(std::get<MatrixXd>(cumlink_atom(z.row(i).transpose(), spec).value));
  return AtomSet::full(ms);
}

AtomSet generic_atoms(const std::vector<MatrixXd>& matrices) {
  if (matrices.empty()) return AtomSet::full(matrices);
  const Index k = matrices.front().rows();
  std::vector<MatrixXd> sym;
  sym.reserve(matrices.size());
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const MatrixXd& a = matrices[i];
    if (a.rows() != k || a.cols() != k) throw DimensionMismatch("matrix " + std::to_string(i) + " is not " + std::to_string(k) + "x" + std::to_string(k));
    if (!a.allFinite()) throw InvalidArgument("matrix " + std::to_string(i) + " has non-finite entries");
    MatrixXd s = 0.5 * (a + a.transpose());
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw NotPSD("matrix " + std::to_string(i) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
    const VectorXd& lam = es.eigenvalues();
    if (lam[0] < -1e-8 * std::max(lam[k - 1], 0.0) || (lam[k - 1] <= 0.0 && lam[0] < 0.0))
      throw NotPSD("matrix " + std::to_string(i) + " has a negative eigenvalue " + std::to_string(lam[0]));
    sym.push_back(std::move(s));
  }
  return AtomSet::full(sym);
}

Standardized standardize_features(const MatrixXd& z, const std::vector<bool>& keep) {
  const Index n = z.rows();
  if (n == 0) throw EmptyInput("no rows to standardize");
  Standardized out{z, VectorXd::Zero(z.cols()), VectorXd::Ones(z.cols())};
  for (Index c = 0; c < z.cols(); ++c) {
    if (static_cast<std::size_t>(c) < keep.size() && keep[static_cast<std::size_t>(c)]) continue;
    const double mean = z.col(c).mean();
    const double sd = std::sqrt((z.col(c).array() - mean).square().sum() / static_cast<double>(n));
    if (!(sd > 0.0)) throw ZeroVariance("column " + std::to_string(c) + " is constant");
    out.means[c] = mean;
    out.sds[c] = sd;
    out.z.col(c) = (z.col(c).array() - mean) / sd;
  }
  return out;
}

}  // namespace bmal
