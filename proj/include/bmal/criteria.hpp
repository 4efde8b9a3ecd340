#pragma once

#include "bmal/atoms.hpp"
#include "bmal/measure.hpp"

namespace bmal {

/// Kiefer's Phi_p criterion applied to Sigma_g = G M^{-1} G^T.
///
/// p = 0 encodes the determinant limit |Sigma|^{1/q}; p = 1 is the A-criterion.
/// G is the q x k Jacobian of the function of interest g(theta); an empty
/// Jacobian means g = identity.
class CriterionSpec {
 public:
  CriterionSpec() = default;
  /// g = identity on a k-dimensional parameter.
  explicit CriterionSpec(double p);
  CriterionSpec(double p, MatrixXd jacobian);

  /// Rows [first, first+count) of the k x k identity.
  static CriterionSpec select(double p, Index k, Index first, Index count);

  double p() const { return p_; }
  bool identity_jacobian() const { return g_.size() == 0; }
  const MatrixXd& jacobian() const { return g_; }
  /// Number of rows of G (k when G is the identity).
  Index q(Index k) const { return identity_jacobian() ? k : g_.rows(); }
  /// Throws DimensionMismatch if G is incompatible with a k-dimensional parameter.
  void check_dim(Index k) const;

 private:
  double p_ = 0.0;
  MatrixXd g_;
};

/// Cached quantities at a measure w.
struct InfoState {
  MatrixXd M;
  MatrixXd M_inv;
  MatrixXd Sigma;
  VectorXd sigma_values;   // ascending, clamped at kEigenFloor
  MatrixXd sigma_vectors;
  double phi_value = 0.0;
  double trace_power = 0.0;  // Tr(Sigma^p); q when p = 0
  /// K such that phi_p(x, w) = Tr(K M_x):
  ///   K = (Phi_p / Tr Sigma^p) M^{-1} G^T Sigma^{p-1} G M^{-1}
  MatrixXd kernel;
  double log_det_M = 0.0;
};

inline constexpr double kSingularRatio = 1e-12;
inline constexpr double kEigenFloor = 1e-14;

InfoState build_info_state(const AtomSet& atoms, const VectorXd& w, const CriterionSpec& spec);
InfoState build_info_state(const AtomSet& atoms, const Measure& w, const CriterionSpec& spec);
/// State from an already assembled information matrix.
InfoState info_state_from_matrix(MatrixXd m, const CriterionSpec& spec);

/// Phi_p(Sigma_g(w)).
double phi_p_value(const InfoState& state, const CriterionSpec& spec);
/// Phi_p of an arbitrary symmetric positive definite covariance.
double phi_p_of_covariance(const MatrixXd& sigma, double p);
/// Phi_p(Sigma_g) for the information matrix m without building the full state.
double criterion_from_information(const MatrixXd& m, const CriterionSpec& spec);
/// Phi_p(Sigma_g(w)) straight from the atoms.
double criterion_value(const AtomSet& atoms, const VectorXd& w, const CriterionSpec& spec);
/// E-criterion lambda_max(Sigma_g), evaluation only.
double e_criterion_value(const InfoState& state);

/// The Phi_p leverage phi_p(x, w) of a single atom.
double phi_p_leverage(const InfoAtom& atom, const InfoState& state, const CriterionSpec& spec);
/// phi_p(x_i, w) for every atom of the pool.
VectorXd phi_p_leverages(const AtomSet& atoms, const InfoState& state);
/// Raw leverages x_i^T M^{-1} x_i (trace form Tr(M^{-1} M_i) for matrix atoms).
VectorXd raw_leverages(const AtomSet& atoms, const MatrixXd& m_inv);

/// One-sided directional derivative of Phi_p at w towards w_prime:
///   eta = -(sum_i w'_i phi_p(x_i, w) - Phi_p(Sigma_g(w))).
double eta(const Measure& w_prime, const Measure& w, const AtomSet& atoms, const CriterionSpec& spec);
double eta(const VectorXd& w_prime, const InfoState& state, const VectorXd& leverages);

/// Second directional derivative at alpha = 0 by central finite differences.
double tau(const Measure& w_prime, const Measure& w, const AtomSet& atoms, const CriterionSpec& spec);
/// Same, using the information matrices of both endpoints (M is linear in w).
double tau_from_information(const MatrixXd& m_w, const MatrixXd& m_prime, const CriterionSpec& spec);

}  // namespace bmal
