#include "bmal/criteria.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "bmal/errors.hpp"

namespace bmal {

CriterionSpec::CriterionSpec(double p) : p_(p) {
  if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("criterion exponent p must be finite and >= 0");
}

CriterionSpec::CriterionSpec(double p, MatrixXd jacobian) : CriterionSpec(p) {
  g_ = std::move(jacobian);
  if (g_.size() == 0) return;
  if (g_.rows() < 1 || g_.rows() > g_.cols()) throw DimensionMismatch("Jacobian must be q x k with 1 <= q <= k");
  if (!g_.allFinite()) throw InvalidArgument("Jacobian has non-finite entries");
  Eigen::JacobiSVD<MatrixXd> svd(g_);
  const VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] <= 1e-12 * s[0]) throw InvalidArgument("Jacobian does not have full row rank");
}

CriterionSpec CriterionSpec::select(double p, Index k, Index first, Index count) {
  if (first < 0 || count < 1 || first + count > k) throw DimensionMismatch("parameter selection out of range");
  if (first == 0 && count == k) return CriterionSpec(p);
  MatrixXd g = MatrixXd::Zero(count, k);
  for (Index r = 0; r < count; ++r) g(r, first + r) = 1.0;
  return CriterionSpec(p, std::move(g));
}

void CriterionSpec::check_dim(Index k) const {
  if (!identity_jacobian() && g_.cols() != k)
    throw DimensionMismatch("Jacobian has " + std::to_string(g_.cols()) + " columns but the parameter has dimension " +
                            std::to_string(k));
}

namespace {

struct PowerSummary {
  double log_phi;
  double log_trace_power;
};

// log Phi_p and log Tr(Sigma^p) from the (clamped) eigenvalues of Sigma.
PowerSummary summarize(const VectorXd& sigma, double p) {
  const double q = static_cast<double>(sigma.size());
  const VectorXd logs = sigma.array().log().matrix();
  if (p == 0.0) return {logs.mean(), std::log(q)};
  const double lmax = logs.maxCoeff();
  // log-mean-exp with expm1/log1p so that tiny p keeps its precision.
  double s = 0.0;
  for (Index j = 0; j < logs.size(); ++j) s += std::expm1(p * (logs[j] - lmax));
  const double log_mean = p * lmax + std::log1p(s / q);
  return {log_mean / p, log_mean + std::log(q)};
}

Eigen::SelfAdjointEigenSolver<MatrixXd> checked_eigen(const MatrixXd& m) {
  if (!m.allFinite()) throw SingularInformation("information matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw SingularInformation("eigendecomposition of the information matrix failed");
  const VectorXd& lam = es.eigenvalues();
  const double lmax = lam[lam.size() - 1];
  if (!(lmax > 0.0) || lam[0] < kSingularRatio * lmax) {
    throw SingularInformation("information matrix is singular (lambda_min = " + std::to_string(lam[0]) +
                              ", lambda_max = " + std::to_string(lmax) + ")");
  }
  return es;
}

}  // namespace

InfoState info_state_from_matrix(MatrixXd m, const CriterionSpec& spec) {
  const Index k = m.rows();
  if (m.cols() != k || k == 0) throw DimensionMismatch("information matrix must be square and non-empty");
  spec.check_dim(k);
  InfoState st;
  st.M = 0.5 * (m + m.transpose());
  const auto es = checked_eigen(st.M);
  const VectorXd& lam = es.eigenvalues();
  const MatrixXd& v = es.eigenvectors();
  st.M_inv = v * lam.cwiseInverse().asDiagonal() * v.transpose();
  st.log_det_M = lam.array().log().sum();

  const double p = spec.p();
  if (spec.identity_jacobian()) {
    st.Sigma = st.M_inv;
    st.sigma_values.resize(k);
    st.sigma_vectors.resize(k, k);
    for (Index j = 0; j < k; ++j) {
      st.sigma_values[j] = std::max(1.0 / lam[k - 1 - j], kEigenFloor);
      st.sigma_vectors.col(j) = v.col(k - 1 - j);
    }
  } else {
    const MatrixXd& g = spec.jacobian();
    MatrixXd s = g * st.M_inv * g.transpose();
    st.Sigma = 0.5 * (s + s.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> ss(st.Sigma);
    st.sigma_values = ss.eigenvalues().cwiseMax(kEigenFloor);
    st.sigma_vectors = ss.eigenvectors();
  }

  const PowerSummary sum = summarize(st.sigma_values, p);
  st.phi_value = std::exp(sum.log_phi);
  st.trace_power = std::exp(sum.log_trace_power);
  const double c = std::exp(sum.log_phi - sum.log_trace_power);

  if (spec.identity_jacobian()) {
    VectorXd d(k);
    for (Index j = 0; j < k; ++j) {
      const double sig = std::max(1.0 / lam[j], kEigenFloor);
      d[j] = c * std::exp((p - 1.0) * std::log(sig)) / (lam[j] * lam[j]);
    }
    st.kernel = v * d.asDiagonal() * v.transpose();
  } else {
    const VectorXd pw = ((p - 1.0) * st.sigma_values.array().log()).exp().matrix();
    const MatrixXd sigma_pow = st.sigma_vectors * pw.asDiagonal() * st.sigma_vectors.transpose();
    const MatrixXd b = spec.jacobian() * st.M_inv;
    st.kernel = c * (b.transpose() * sigma_pow * b);
  }
  st.kernel = 0.5 * (st.kernel + st.kernel.transpose());
  return st;
}

InfoState build_info_state(const AtomSet& atoms, const VectorXd& w, const CriterionSpec& spec) {
  if (w.size() != atoms.size())
    throw DimensionMismatch("measure has " + std::to_string(w.size()) + " weights for " + std::to_string(atoms.size()) +
                            " atoms");
  return info_state_from_matrix(atoms.information(w), spec);
}

InfoState build_info_state(const AtomSet& atoms, const Measure& w, const CriterionSpec& spec) {
  return build_info_state(atoms, w.weights(), spec);
}

double phi_p_value(const InfoState& state, const CriterionSpec&) { return state.phi_value; }

double phi_p_of_covariance(const MatrixXd& sigma, double p) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma + sigma.transpose()), Eigen::EigenvaluesOnly);
  return std::exp(summarize(es.eigenvalues().cwiseMax(kEigenFloor), p).log_phi);
}

double criterion_from_information(const MatrixXd& m, const CriterionSpec& spec) {
  const Index k = m.rows();
  spec.check_dim(k);
  const MatrixXd sym = 0.5 * (m + m.transpose());
  if (spec.identity_jacobian()) {
    if (!sym.allFinite()) throw SingularInformation("information matrix has non-finite entries");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const VectorXd& lam = es.eigenvalues();
    if (!(lam[k - 1] > 0.0) || lam[0] < kSingularRatio * lam[k - 1]) throw SingularInformation("information matrix is singular");
    VectorXd sig(k);
    for (Index j = 0; j < k; ++j) sig[j] = std::max(1.0 / lam[j], kEigenFloor);
    return std::exp(summarize(sig, spec.p()).log_phi);
  }
  const auto es = checked_eigen(sym);
  const MatrixXd& v = es.eigenvectors();
  const MatrixXd b = spec.jacobian() * v;
  const MatrixXd s = b * es.eigenvalues().cwiseInverse().asDiagonal() * b.transpose();
  return phi_p_of_covariance(s, spec.p());
}

double criterion_value(const AtomSet& atoms, const VectorXd& w, const CriterionSpec& spec) {
  return criterion_from_information(atoms.information(w), spec);
}

double e_criterion_value(const InfoState& state) { return state.sigma_values.maxCoeff(); }

double phi_p_leverage(const InfoAtom& atom, const InfoState& state, const CriterionSpec&) {
  if (atom.dim() != state.kernel.rows()) throw DimensionMismatch("atom dimension does not match the information state");
  return atom.trace_with(state.kernel);
}

VectorXd phi_p_leverages(const AtomSet& atoms, const InfoState& state) {
  if (atoms.dim() != state.kernel.rows()) throw DimensionMismatch("atom dimension does not match the information state");
  return atoms.trace_products(state.kernel);
}

VectorXd raw_leverages(const AtomSet& atoms, const MatrixXd& m_inv) { return atoms.trace_products(m_inv); }

double eta(const VectorXd& w_prime, const InfoState& state, const VectorXd& leverages) {
  return -(w_prime.dot(leverages) - state.phi_value);
}

double eta(const Measure& w_prime, const Measure& w, const AtomSet& atoms, const CriterionSpec& spec) {
  const InfoState st = build_info_state(atoms, w, spec);
  return eta(w_prime.weights(), st, phi_p_leverages(atoms, st));
}

double tau_from_information(const MatrixXd& m_w, const MatrixXd& m_prime, const CriterionSpec& spec) {
  const double f0 = criterion_from_information(m_w, spec);
  const MatrixXd dm = m_prime - m_w;
  double h = 1e-4;
  for (int attempt = 0;; ++attempt) {
    try {
      const double fp = criterion_from_information(m_w + h * dm, spec);
      const double fm = criterion_from_information(m_w - h * dm, spec);
      return std::max(0.0, (fp - 2.0 * f0 + fm) / (h * h));
    } catch (const SingularInformation&) {
      if (attempt > 0) throw;
      h *= 0.1;
    }
  }
}

double tau(const Measure& w_prime, const Measure& w, const AtomSet& atoms, const CriterionSpec& spec) {
  return tau_from_information(atoms.information(w.weights()), atoms.information(w_prime.weights()), spec);
}

}  // namespace bmal
