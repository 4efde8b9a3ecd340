#include "bmal/baselines.hpp"

#include <chrono>
#include <cmath>
#include <algorithm>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "bmal/criteria.hpp"
#include "bmal/errors.hpp"

namespace bmal {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

MatrixXd checked_inverse(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SingularInformation(std::string(what) + ": information matrix is singular");
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

double d_value(const MatrixXd& m) {
  return criterion_from_information(m, CriterionSpec(0.0));
}

void check_inputs(const AtomSet& atoms, Index n) {
  if (!atoms.is_rank_one()) throw InvalidArgument("baselines require rank-one atoms");
  if (n < atoms.dim() || n > atoms.size()) throw InvalidArgument("sample size must lie in [k, N]");
}

}  // namespace

BaselineResult backward_select(const AtomSet& atoms, Index n, const BaselineOptions& opts) {
  check_inputs(atoms, n);
  const auto t0 = Clock::now();
  const MatrixXd& x = atoms.vectors();
  // Remaining points are kept compacted in `rem` with their pool indices in `ids`.
  MatrixXd rem = x;
  std::vector<Index> ids(static_cast<std::size_t>(x.rows()));
  std::iota(ids.begin(), ids.end(), Index{0});
  Index count = x.rows();
  MatrixXd m = rem.transpose() * rem;
  MatrixXd m_inv = checked_inverse(m, "backward");

  BaselineResult res;
  while (count > n) {
    if (opts.time_limit_seconds > 0.0 && seconds_since(t0) > opts.time_limit_seconds) {
      res.timed_out = true;
      break;
    }
    const auto active = rem.topRows(count);
    const VectorXd lev = (active * m_inv).cwiseProduct(active).rowwise().sum();
    Index best = 0;
    for (Index j = 1; j < count; ++j) {
      const auto bj = static_cast<std::size_t>(best);
      const auto jj = static_cast<std::size_t>(j);
      if (lev[j] < lev[best] || (lev[j] == lev[best] && ids[jj] < ids[bj])) best = j;
    }
    const VectorXd xd = rem.row(best).transpose();
    const double h = lev[best];
    if (!(1.0 - h > 1e-10)) throw SingularInformation("backward: deleting any remaining point makes M(S) singular");
    // Sherman-Morrison downdate of M^{-1} for M - x x^T.
    const VectorXd u = m_inv * xd;
    m_inv.noalias() += (u * u.transpose()) / (1.0 - h);
    m.noalias() -= xd * xd.transpose();
    --count;
    rem.row(best) = rem.row(count);
    ids[static_cast<std::size_t>(best)] = ids[static_cast<std::size_t>(count)];
    ++res.iterations;
    if (res.iterations % 256 == 0) m_inv = checked_inverse(m, "backward");
  }
  ids.resize(static_cast<std::size_t>(count));
  res.sample = SampleSet(std::move(ids));
  VectorXd indicator = VectorXd::Zero(x.rows());
  for (Index i : res.sample.indices()) indicator[i] = 1.0;
  res.criterion_value = d_value(atoms.information(indicator));
  res.wall_seconds = seconds_since(t0);
  return res;
}

BaselineResult exchange_select(const AtomSet& atoms, Index n, const BaselineOptions& opts) {
  check_inputs(atoms, n);
  const auto t0 = Clock::now();
  const MatrixXd& x = atoms.vectors();
  const Index total = x.rows();

  // Initial sample: top-n leverages with respect to the full pool.
  const VectorXd lev0 = raw_leverages(atoms, checked_inverse(x.transpose() * x, "exchange"));
  std::vector<Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + n, order.end(),
                    [&](Index a, Index b) { return lev0[a] > lev0[b] || (lev0[a] == lev0[b] && a < b); });
  std::vector<char> in(static_cast<std::size_t>(total), 0);
  for (Index j = 0; j < n; ++j) in[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = 1;

  MatrixXd m = MatrixXd::Zero(x.cols(), x.cols());
  for (Index i = 0; i < total; ++i)
    if (in[static_cast<std::size_t>(i)]) m.noalias() += x.row(i).transpose() * x.row(i);

  BaselineResult res;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    if (opts.time_limit_seconds > 0.0 && seconds_since(t0) > opts.time_limit_seconds) {
      res.timed_out = true;
      break;
    }
    const MatrixXd m_inv = checked_inverse(m, "exchange");
    const VectorXd lev = raw_leverages(atoms, m_inv);
    Index del = -1;
    Index add = -1;
    for (Index i = 0; i < total; ++i) {
      if (in[static_cast<std::size_t>(i)]) {
        if (del < 0 || lev[i] < lev[del]) del = i;
      } else {
        if (add < 0 || lev[i] > lev[add]) add = i;
      }
    }
    if (del < 0 || add < 0) break;
    // |M - x_d x_d^T + x_a x_a^T| / |M| = (1 - h_d)(1 + h_a) + h_ad^2
    const double h_ad = x.row(add).dot(m_inv * x.row(del).transpose());
    const double ratio = (1.0 - lev[del]) * (1.0 + lev[add]) + h_ad * h_ad;
    if (!(ratio > 1.0 + 1e-12)) break;
    m.noalias() += x.row(add).transpose() * x.row(add) - x.row(del).transpose() * x.row(del);
    in[static_cast<std::size_t>(del)] = 0;
    in[static_cast<std::size_t>(add)] = 1;
    ++res.iterations;
  }
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < total; ++i)
    if (in[static_cast<std::size_t>(i)]) chosen.push_back(i);
  res.sample = SampleSet(std::move(chosen));
  res.criterion_value = d_value(m);
  res.wall_seconds = seconds_since(t0);
  return res;
}

}  // namespace bmal
