#pragma once

#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace bmal {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Information contributed by a single candidate point: either a feature
/// vector x (contribution x x^T) or a full symmetric PSD k x k matrix.
struct InfoAtom {
  std::variant<VectorXd, MatrixXd> value;

  Index dim() const;
  bool is_vector() const { return std::holds_alternative<VectorXd>(value); }
  MatrixXd to_matrix() const;
  /// Tr(A M_x) for symmetric A.
  double trace_with(const MatrixXd& a) const;
};

/// A pool of N atoms of common dimension k, stored densely so that the
/// per-point maps used by the solvers are single matrix products.
///
/// Rank-one pools keep the N x k matrix of vectors. Full pools keep an
/// N x k^2 matrix whose row i is the column-major flattening of M_i, so
/// Tr(A M_i) for every i is one matrix-vector product.
class AtomSet {
 public:
  AtomSet() = default;

  static AtomSet rank_one(MatrixXd vectors);
  static AtomSet full(const std::vector<MatrixXd>& matrices);
  /// Rank-one if every atom is a vector, otherwise all atoms are expanded.
  static AtomSet from_atoms(const std::vector<InfoAtom>& atoms);

  Index size() const { return n_; }
  Index dim() const { return k_; }
  bool is_rank_one() const { return rank_one_; }

  InfoAtom atom(Index i) const;
  const MatrixXd& vectors() const { return data_; }

  /// M += scale * M_i
  void add_to(MatrixXd& m, Index i, double scale) const;
  /// sum_i w_i M_i over the nonzero entries of w.
  MatrixXd information(const VectorXd& w) const;
  /// sum_{i in idx} w[i] M_i
  MatrixXd information(const VectorXd& w, std::span<const Index> idx) const;

  /// Tr(A M_i) for every atom (A symmetric).
  VectorXd trace_products(const MatrixXd& a) const;
  VectorXd trace_products(const MatrixXd& a, std::span<const Index> idx) const;
  double trace_product(const MatrixXd& a, Index i) const;

  AtomSet subset(std::span<const Index> idx) const;

 private:
  MatrixXd data_;
  Index n_ = 0;
  Index k_ = 0;
  bool rank_one_ = true;
};

}  // namespace bmal
