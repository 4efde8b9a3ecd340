#include "bmal/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Cholesky>

#include "bmal/errors.hpp"

namespace bmal {

namespace {

// log(1 + exp(t)) without overflow.
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double logistic_loglik(const MatrixXd& x, const VectorXd& y, const VectorXd& beta) {
  const VectorXd eta = x * beta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
  return ll;
}

VectorXd solve_spd(const MatrixXd& h, const VectorXd& g) {
  Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw FitDiverged("information matrix is singular during fitting");
  VectorXd step = llt.solve(g);
  if (!step.allFinite()) throw FitDiverged("non-finite Newton step");
  return step;
}

struct CumlinkEval {
  double loglik = 0.0;
  VectorXd score;
  MatrixXd info;
  bool valid = false;
};

CumlinkEval cumlink_eval(const MatrixXd& z, const std::vector<Index>& y, const CumulativeLinkSpec& spec,
                         bool derivatives) {
  CumlinkEval ev;
  const Index d = spec.beta.size();
  const Index jn = spec.categories();
  const Index k = d + jn - 1;
  for (Index j = 1; j < spec.cuts.size(); ++j)
    if (!(spec.cuts[j] > spec.cuts[j - 1])) return ev;
  if (derivatives) {
    ev.score = VectorXd::Zero(k);
    ev.info = MatrixXd::Zero(k, k);
  }
  VectorXd f(jn + 1);
  VectorXd a(k);
  for (Index i = 0; i < z.rows(); ++i) {
    const VectorXd zi = z.row(i).transpose();
    const VectorXd pi = category_probabilities(zi, spec);
    if (!(pi.minCoeff() > kCategoryFloor)) return ev;
    const Index c = y[static_cast<std::size_t>(i)];
    ev.loglik += std::log(pi[c]);
    if (!derivatives) continue;
    const double eta = zi.dot(spec.beta);
    f.setZero();
    for (Index j = 1; j < jn; ++j) f[j] = link_density(spec.link, spec.cuts[j - 1] - eta);
    for (Index j = 1; j <= jn; ++j) {
      a.setZero();
      a.head(d) = -(f[j] - f[j - 1]) * zi;
      if (j < jn) a[d + j - 1] = f[j];
      if (j > 1) a[d + j - 2] = -f[j - 1];
      ev.info.noalias() += (a * a.transpose()) / pi[j - 1];
      if (j - 1 == c) ev.score += a / pi[j - 1];
    }
  }
  ev.valid = std::isfinite(ev.loglik);
  return ev;
}

}  // namespace

LogisticFit fit_logistic(const MatrixXd& x, const VectorXd& y, const FitOptions& opts) {
  if (x.rows() != y.size()) throw DimensionMismatch("response length does not match the design rows");
  if (x.rows() == 0) throw EmptyInput("no observations to fit");
  for (Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0) throw InvalidArgument("logistic response must be 0 or 1 (row " + std::to_string(i) + ")");

  LogisticFit fit{VectorXd::Zero(x.cols()), 0, 0.0};
  double ll = logistic_loglik(x, y, fit.beta);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const VectorXd eta = x * fit.beta;
    if (eta.cwiseAbs().maxCoeff() > opts.max_abs_eta)
      throw FitDiverged("linear predictor exceeds " + std::to_string(opts.max_abs_eta) + "; the data look separable");
    VectorXd p(eta.size());
    VectorXd w(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      p[i] = link_cdf(Link::Logit, eta[i]);
      w[i] = link_density(Link::Logit, eta[i]);
    }
    const VectorXd g = x.transpose() * (y - p);
    fit.iterations = it;
    fit.log_likelihood = ll;
    if (g.norm() <= opts.gradient_tol) return fit;
    if (w.maxCoeff() < 1e-6) throw FitDiverged("all fitted probabilities are saturated; the data look separable");
    const MatrixXd h = x.transpose() * w.asDiagonal() * x;
    const VectorXd step = solve_spd(h, g);
    double t = 1.0;
    VectorXd next = fit.beta + step;
    double ll_next = logistic_loglik(x, y, next);
    for (int half = 0; half < 40 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++half) {
      t *= 0.5;
      next = fit.beta + t * step;
      ll_next = logistic_loglik(x, y, next);
    }
    if (!next.allFinite() || !std::isfinite(ll_next)) throw FitDiverged("non-finite coefficients");
    fit.beta = next;
    ll = ll_next;
  }
  throw FitDiverged("Newton iterations did not converge in " + std::to_string(opts.max_iterations) + " steps");
}

CumulativeLinkFit fit_cumlink(const MatrixXd& z, const std::vector<Index>& y, Index categories,
                              const FitOptions& opts) {
  if (static_cast<std::size_t>(z.rows()) != y.size()) throw DimensionMismatch("response length does not match the design rows");
  if (z.rows() == 0) throw EmptyInput("no observations to fit");
  if (categories < 2) throw InvalidArgument("cumulative link model needs at least two categories");
  std::vector<double> counts(static_cast<std::size_t>(categories), 0.0);
  for (Index c : y) {
    if (c < 0 || c >= categories) throw InvalidArgument("category label out of range");
    counts[static_cast<std::size_t>(c)] += 1.0;
  }
  for (Index j = 0; j < categories; ++j)
    if (counts[static_cast<std::size_t>(j)] == 0.0) throw FitDiverged("category " + std::to_string(j) + " is not observed");

  CumulativeLinkFit fit;
  fit.spec.beta = VectorXd::Zero(z.cols());
  fit.spec.cuts.resize(categories - 1);
  double cum = 0.0;
  const double total = static_cast<double>(y.size());
  for (Index j = 0; j + 1 < categories; ++j) {
    cum += counts[static_cast<std::size_t>(j)];
    const double q = cum / total;
    fit.spec.cuts[j] = std::log(q / (1.0 - q));
  }

  const Index d = z.cols();
  CumlinkEval ev = cumlink_eval(z, y, fit.spec, true);
  if (!ev.valid) throw FitDiverged("starting values give a degenerate category");
  for (int it = 0; it < opts.max_iterations; ++it) {
    fit.iterations = it;
    fit.log_likelihood = ev.loglik;
    if (ev.score.norm() <= opts.gradient_tol) return fit;
    if ((z * fit.spec.beta).cwiseAbs().maxCoeff() > opts.max_abs_eta)
      throw FitDiverged("linear predictor exceeds " + std::to_string(opts.max_abs_eta) + "; the data look separable");
    const VectorXd step = solve_spd(ev.info, ev.score);
    double t = 1.0;
    CumulativeLinkSpec next = fit.spec;
    CumlinkEval trial;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      next.beta = fit.spec.beta + t * step.head(d);
      next.cuts = fit.spec.cuts + t * step.tail(categories - 1);
      const CumlinkEval probe = cumlink_eval(z, y, next, false);
      if (probe.valid && probe.loglik >= ev.loglik - 1e-12 * std::abs(ev.loglik)) {
        trial = cumlink_eval(z, y, next, true);
        break;
      }
    }
    if (!trial.valid) throw FitDiverged("Fisher scoring could not improve the likelihood");
    fit.spec = next;
    ev = std::move(trial);
  }
  throw FitDiverged("Fisher scoring did not converge in " + std::to_string(opts.max_iterations) + " steps");
}

CategoryCoding code_categories(const VectorXd& labels) {
  std::map<double, Index> levels;
  for (Index i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(labels[i])) throw InvalidArgument("non-finite category label");
    levels.emplace(labels[i], 0);
  }
  CategoryCoding out;
  for (auto& [value, code] : levels) {
    code = static_cast<Index>(out.levels.size());
    out.levels.push_back(value);
  }
  out.codes.reserve(static_cast<std::size_t>(labels.size()));
  for (Index i = 0; i < labels.size(); ++i) out.codes.push_back(levels.at(labels[i]));
  return out;
}

}  // namespace bmal
