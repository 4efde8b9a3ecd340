#pragma once

#include <vector>

#include "bmal/atoms.hpp"

namespace bmal {

struct LogisticModelSpec {
  VectorXd beta;            // working coefficients, intercept first when add_intercept
  bool add_intercept = false;  // prepend a constant 1 to every feature row
};

enum class Link { Logit };

/// Cumulative link model h(gamma_j) = theta_j - z^T beta, j = 1..J-1.
/// Parameters are ordered (beta_1..beta_d, theta_1..theta_{J-1}).
struct CumulativeLinkSpec {
  VectorXd beta;
  VectorXd cuts;  // strictly increasing, length J-1
  Link link = Link::Logit;

  Index categories() const { return cuts.size() + 1; }
  Index parameter_dim() const { return beta.size() + cuts.size(); }
  void validate() const;
};

/// Inverse link and its derivative.
double link_cdf(Link link, double t);
double link_density(Link link, double t);

/// Category probabilities pi_1..pi_J at covariate z.
VectorXd category_probabilities(const VectorXd& z, const CumulativeLinkSpec& spec);

/// Rows of Z with a leading 1 when requested.
MatrixXd design_matrix(const MatrixXd& z, bool add_intercept);

/// x_i = sqrt(p_i (1 - p_i)) z_i with p_i = 1 / (1 + exp(-z_i^T beta)).
AtomSet logistic_atoms(const MatrixXd& z, const LogisticModelSpec& spec);

/// Atoms x_i = z_i (ordinary least squares information).
AtomSet linear_atoms(const MatrixXd& z);

inline constexpr double kCategoryFloor = 1e-12;

/// M_z = sum_j pi_j^{-1} a_j a_j^T with a_j = d pi_j / d(beta, theta).
InfoAtom cumlink_atom(const VectorXd& z, const CumulativeLinkSpec& spec);
AtomSet cumlink_atoms(const MatrixXd& z, const CumulativeLinkSpec& spec);

/// Validates and symmetrizes user-supplied information matrices.
AtomSet generic_atoms(const std::vector<MatrixXd>& matrices);

struct Standardized {
  MatrixXd z;
  VectorXd means;
  VectorXd sds;  // population standard deviations (divide by N)
};

/// Centers and scales every column except those flagged in `keep`
/// (intercept columns), which are returned unchanged with mean 0, sd 1.
Standardized standardize_features(const MatrixXd& z, const std::vector<bool>& keep = {});

}  // namespace bmal
