#include "bmal/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bmal/criteria.hpp"
#include "bmal/errors.hpp"

namespace bmal {

namespace {

// Number of coordinates at the cap in an SG measure and the leftover mass.
std::pair<Index, double> cap_layout(double epsilon, double mass) {
  auto m = static_cast<Index>(std::floor(mass / epsilon));
  if (static_cast<double>(m + 1) * epsilon <= mass * (1.0 + 1e-12)) ++m;
  double residual = mass - static_cast<double>(m) * epsilon;
  if (residual < 1e-15) residual = 0.0;
  return {m, residual};
}

// Indices ordered by score descending, index ascending; only the first
// `count` positions are guaranteed sorted.
std::vector<Index> top_order(const VectorXd& scores, Index count) {
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  auto better = [&](Index a, Index b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  const auto c = static_cast<std::size_t>(std::min<Index>(count, scores.size()));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(c), order.end(), better);
  return order;
}

}  // namespace

Measure sg_measure(const VectorXd& scores, double epsilon) {
  const Index n = scores.size();
  if (!(epsilon > 0.0) || static_cast<double>(n) * epsilon < 1.0 - 1e-12)
    throw InfeasibleEpsilon("N * epsilon < 1: the capped simplex is empty");
  for (Index i = 0; i < n; ++i)
    if (std::isnan(scores[i])) throw InvalidArgument("scores must not be NaN");
  auto [m, residual] = cap_layout(epsilon, 1.0);
  m = std::min(m, n);
  const std::vector<Index> order = top_order(scores, m + 1);
  VectorXd w = VectorXd::Zero(n);
  for (Index j = 0; j < m; ++j) w[order[static_cast<std::size_t>(j)]] = epsilon;
  if (residual > 0.0 && m < n) w[order[static_cast<std::size_t>(m)]] = residual;
  return Measure(std::move(w), epsilon);
}

Measure psg_measure(const VectorXd& scores, double epsilon, const AtomSet& atoms, const Measure& fallback) {
  const Measure sg = sg_measure(scores, epsilon);
  const CriterionSpec dspec(0.0);
  auto nonsingular = [&](const Measure& m) {
    try {
      criterion_from_information(atoms.information(m.weights()), dspec);
      return true;
    } catch (const SingularInformation&) {
      return false;
    }
  };
  if (nonsingular(sg)) return sg;
  for (double delta = 1e-6; delta <= 1e-2 * (1.0 + 1e-9); delta *= 10.0) {
    Measure blended = sg.mix(fallback, delta);
    if (nonsingular(blended)) return Measure(blended.weights(), epsilon);
  }
  throw PositivityRepairFailed("steepest-gradient measure stays singular after blending with delta = 1e-2");
}

VectorXd project_capped_simplex(const VectorXd& v, double epsilon, double mass) {
  const Index m = v.size();
  if (!(epsilon > 0.0)) throw InfeasibleMass("epsilon must be positive");
  if (mass < -1e-15 || mass > static_cast<double>(m) * epsilon * (1.0 + 1e-12) + 1e-15)
    throw InfeasibleMass("mass " + std::to_string(mass) + " outside [0, m * epsilon]");
  if (m == 0) return v;
  mass = std::clamp(mass, 0.0, static_cast<double>(m) * epsilon);

  auto total = [&](double lambda) {
    double s = 0.0;
    for (Index i = 0; i < m; ++i) s += std::clamp(v[i] - lambda, 0.0, epsilon);
    return s;
  };
  auto shifted = [&](double lambda) {
    VectorXd u(m);
    for (Index i = 0; i < m; ++i) u[i] = std::clamp(v[i] - lambda, 0.0, epsilon);
    // Spread the rounding residual over coordinates with room to move.
    for (int pass = 0; pass < 4; ++pass) {
      const double r = mass - u.sum();
      if (r == 0.0) break;
      Index movable = 0;
      for (Index i = 0; i < m; ++i) movable += (r > 0.0 ? u[i] < epsilon : u[i] > 0.0) ? 1 : 0;
      if (movable == 0) break;
      const double share = r / static_cast<double>(movable);
      for (Index i = 0; i < m; ++i) {
        if (r > 0.0 ? u[i] < epsilon : u[i] > 0.0) u[i] = std::clamp(u[i] + share, 0.0, epsilon);
      }
    }
    return u;
  };
  // For a fixed active pattern the shift solving sum u = mass is explicit;
  // accept it once the pattern it induces is self-consistent.
  auto exact_shift = [&](double lambda, double& out) {
    double free_sum = 0.0;
    Index free_count = 0;
    Index capped = 0;
    for (Index i = 0; i < m; ++i) {
      const double t = v[i] - lambda;
      if (t >= epsilon) {
        ++capped;
      } else if (t > 0.0) {
        free_sum += v[i];
        ++free_count;
      }
    }
    if (free_count == 0) return false;
    out = (free_sum + epsilon * static_cast<double>(capped) - mass) / static_cast<double>(free_count);
    return std::abs(total(out) - mass) <= 1e-12;
  };

  double lo = v.minCoeff() - epsilon;  // total(lo) = m * eps >= mass
  double hi = v.maxCoeff();            // total(hi) = 0 <= mass
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double s = total(mid);
    double exact = 0.0;
    if (exact_shift(mid, exact)) return shifted(exact);
    if (std::abs(s - mass) <= 1e-12 && it > 60) return shifted(mid);
    if (s > mass) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-300) break;
  }
  return shifted(0.5 * (lo + hi));
}

double capped_linear_max(const VectorXd& scores, double epsilon, double mass) {
  auto [m, residual] = cap_layout(epsilon, mass);
  m = std::min(m, scores.size());
  const std::vector<Index> order = top_order(scores, m + 1);
  double val = 0.0;
  for (Index j = 0; j < m; ++j) val += epsilon * scores[order[static_cast<std::size_t>(j)]];
  if (residual > 0.0 && m < scores.size()) val += residual * scores[order[static_cast<std::size_t>(m)]];
  return val;
}

SampleSet round_to_sample(const Measure& w, Index n, const VectorXd& scores, std::span<const Index> exclude) {
  const Index total = w.size();
  if (scores.size() != total) throw DimensionMismatch("scores and weights differ in length");
  std::vector<char> skip(static_cast<std::size_t>(total), 0);
  for (Index i : exclude) skip[static_cast<std::size_t>(i)] = 1;
  std::vector<Index> cand;
  cand.reserve(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i)
    if (!skip[static_cast<std::size_t>(i)]) cand.push_back(i);
  if (n < 0 || n > static_cast<Index>(cand.size())) throw InvalidArgument("cannot round to more points than available");
  // Weights within 1e-12 of each other count as tied.
  auto key = [&](Index i) { return std::round(w[i] * 1e12); };
  auto better = [&](Index a, Index b) {
    const double ka = key(a);
    const double kb = key(b);
    if (ka != kb) return ka > kb;
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(cand.begin(), cand.begin() + n, cand.end(), better);
  return SampleSet(std::vector<Index>(cand.begin(), cand.begin() + n));
}

SampleSet round_to_sample(const Measure& w, Index n, const VectorXd& scores) {
  return round_to_sample(w, n, scores, std::span<const Index>{});
}

Measure measure_of_sample(const SampleSet& s, Index pool_size) {
  const Index n = s.size();
  if (n < 1) throw InvalidArgument("empty sample");
  if (s.indices().back() >= pool_size) throw InvalidArgument("sample index outside the pool");
  const double u = 1.0 / static_cast<double>(n);
  VectorXd w = VectorXd::Zero(pool_size);
  for (Index i : s.indices()) w[i] = u;
  return Measure(std::move(w), u);
}

TrichotomyReport trichotomy_check(const Measure& w, const VectorXd& leverages, double tol) {
  const Index n = w.size();
  if (leverages.size() != n) throw DimensionMismatch("leverages and weights differ in length");
  TrichotomyReport rep{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), {}, true};
  for (Index i = 0; i < n; ++i) {
    if (w.at_zero(i)) {
      rep.c_low = std::max(rep.c_low, leverages[i]);
    } else if (w.at_cap(i)) {
      rep.c_high = std::min(rep.c_high, leverages[i]);
    }
  }
  for (Index i = 0; i < n; ++i) {
    const double l = leverages[i];
    bool bad = false;
    if (w.at_zero(i)) {
      bad = l > rep.c_high + tol;
    } else if (w.at_cap(i)) {
      bad = l < rep.c_low - tol;
    } else {
      bad = l < rep.c_low - tol || l > rep.c_high + tol;
    }
    if (bad) rep.violations.push_back(i);
  }
  rep.passed = rep.c_low <= rep.c_high + tol && rep.violations.empty();
  return rep;
}

}  // namespace bmal
