#pragma once

#include "bmal/atoms.hpp"
#include "bmal/models.hpp"

namespace bmal {

struct FitOptions {
  double gradient_tol = 1e-8;
  int max_iterations = 100;
  double max_abs_eta = 30.0;  // linear predictors beyond this signal separation
};

struct LogisticFit {
  VectorXd beta;
  int iterations = 0;
  double log_likelihood = 0.0;
};

/// Maximum likelihood for log(p/(1-p)) = x^T beta by Newton-Raphson with
/// step halving. `x` already contains any intercept column; y is 0/1.
/// Throws FitDiverged when the MLE does not exist or is not reached.
LogisticFit fit_logistic(const MatrixXd& x, const VectorXd& y, const FitOptions& opts = {});

struct CumulativeLinkFit {
  CumulativeLinkSpec spec;
  int iterations = 0;
  double log_likelihood = 0.0;
};

/// Maximum likelihood for the proportional odds model by Fisher scoring.
/// y holds category labels 0..J-1; every category must be observed.
CumulativeLinkFit fit_cumlink(const MatrixXd& z, const std::vector<Index>& y, Index categories,
                              const FitOptions& opts = {});

/// Maps arbitrary numeric labels to 0..J-1 in increasing order.
struct CategoryCoding {
  std::vector<double> levels;
  std::vector<Index> codes;
};
CategoryCoding code_categories(const VectorXd& labels);

}  // namespace bmal
