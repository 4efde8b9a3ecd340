#include "bmal/atoms.hpp"

#include "bmal/errors.hpp"

namespace bmal {

Index InfoAtom::dim() const {
  return std::visit([](const auto& v) { return v.rows(); }, value);
}

MatrixXd InfoAtom::to_matrix() const {
  if (const auto* x = std::get_if<VectorXd>(&value)) return (*x) * x->transpose();
  return std::get<MatrixXd>(value);
}

double InfoAtom::trace_with(const MatrixXd& a) const {
  if (const auto* x = std::get_if<VectorXd>(&value)) return x->dot(a * (*x));
  return (a.cwiseProduct(std::get<MatrixXd>(value))).sum();
}

AtomSet AtomSet::rank_one(MatrixXd vectors) {
  AtomSet s;
  s.n_ = vectors.rows();
  s.k_ = vectors.cols();
  s.rank_one_ = true;
  s.data_ = std::move(vectors);
  return s;
}

AtomSet AtomSet::full(const std::vector<MatrixXd>& matrices) {
  AtomSet s;
  s.rank_one_ = false;
  s.n_ = static_cast<Index>(matrices.size());
  s.k_ = matrices.empty() ? 0 : matrices.front().rows();
  s.data_.resize(s.n_, s.k_ * s.k_);
  for (Index i = 0; i < s.n_; ++i) {
    const MatrixXd& m = matrices[static_cast<std::size_t>(i)];
    if (m.rows() != s.k_ || m.cols() != s.k_) {
      throw DimensionMismatch("atom " + std::to_string(i) + " is " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", expected " + std::to_string(s.k_) + "x" +
                              std::to_string(s.k_));
    }
    s.data_.row(i) = Eigen::Map<const VectorXd>(m.data(), s.k_ * s.k_).transpose();
  }
  return s;
}

AtomSet AtomSet::from_atoms(const std::vector<InfoAtom>& atoms) {
  if (atoms.empty()) return rank_one(MatrixXd(0, 0));
  const Index k = atoms.front().dim();
  bool all_vectors = true;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const InfoAtom& a = atoms[i];
    if (a.dim() != k) throw DimensionMismatch("atom " + std::to_string(i) + " is not " + std::to_string(k) + "-dimensional");
    if (!a.is_vector()) {
      const auto& m = std::get<MatrixXd>(a.value);
      if (m.cols() != k) throw DimensionMismatch("atom " + std::to_string(i) + " is not square");
      all_vectors = false;
    }
  }
  if (all_vectors) {
    MatrixXd x(static_cast<Index>(atoms.size()), k);
    for (std::size_t i = 0; i < atoms.size(); ++i) x.row(static_cast<Index>(i)) = std::get<VectorXd>(atoms[i].value).transpose();
    return rank_one(std::move(x));
  }
  std::vector<MatrixXd> ms;
  ms.reserve(atoms.size());
  for (const auto& a : atoms) ms.push_back(a.to_matrix());
  return full(ms);
}

InfoAtom AtomSet::atom(Index i) const {
  if (rank_one_) return InfoAtom{VectorXd(data_.row(i).transpose())};
  MatrixXd m(k_, k_);
  Eigen::Map<VectorXd>(m.data(), k_ * k_) = data_.row(i).transpose();
  return InfoAtom{std::move(m)};
}

void AtomSet::add_to(MatrixXd& m, Index i, double scale) const {
  if (rank_one_) {
    m.noalias() += scale * data_.row(i).transpose() * data_.row(i);
  } else {
    Eigen::Map<VectorXd>(m.data(), k_ * k_) += scale * data_.row(i).transpose();
  }
}

MatrixXd AtomSet::information(const VectorXd& w) const {
  if (w.size() != n_) throw DimensionMismatch("weight vector length does not match the number of atoms");
  MatrixXd m = MatrixXd::Zero(k_, k_);
  if (rank_one_) {
    // Gather nonzero rows so the product runs through a single GEMM.
    std::vector<Index> nz;
    nz.reserve(static_cast<std::size_t>(n_));
    for (Index i = 0; i < n_; ++i)
      if (w[i] != 0.0) nz.push_back(i);
    MatrixXd xs(static_cast<Index>(nz.size()), k_);
    for (std::size_t j = 0; j < nz.size(); ++j) xs.row(static_cast<Index>(j)) = std::sqrt(std::abs(w[nz[j]])) * data_.row(nz[j]);
    m.noalias() = xs.transpose() * xs;
    // Negative weights only arise in finite-difference probes.
    for (std::size_t j = 0; j < nz.size(); ++j)
      if (w[nz[j]] < 0.0) m.noalias() += 2.0 * w[nz[j]] * data_.row(nz[j]).transpose() * data_.row(nz[j]);
  } else {
    VectorXd flat = data_.transpose() * w;
    m = Eigen::Map<const MatrixXd>(flat.data(), k_, k_);
  }
  return m;
}

MatrixXd AtomSet::information(const VectorXd& w, std::span<const Index> idx) const {
  MatrixXd m = MatrixXd::Zero(k_, k_);
  for (Index i : idx)
    if (w[i] != 0.0) add_to(m, i, w[i]);
  return m;
}

VectorXd AtomSet::trace_products(const MatrixXd& a) const {
  if (rank_one_) return (data_ * a).cwiseProduct(data_).rowwise().sum();
  return data_ * Eigen::Map<const VectorXd>(a.data(), k_ * k_);
}

VectorXd AtomSet::trace_products(const MatrixXd& a, std::span<const Index> idx) const {
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out[static_cast<Index>(j)] = trace_product(a, idx[j]);
  return out;
}

double AtomSet::trace_product(const MatrixXd& a, Index i) const {
  if (rank_one_) return data_.row(i).dot(data_.row(i) * a);
  return data_.row(i).dot(Eigen::Map<const VectorXd>(a.data(), k_ * k_));
}

AtomSet AtomSet::subset(std::span<const Index> idx) const {
  AtomSet s;
  s.rank_one_ = rank_one_;
  s.k_ = k_;
  s.n_ = static_cast<Index>(idx.size());
  s.data_.resize(s.n_, data_.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) s.data_.row(static_cast<Index>(j)) = data_.row(idx[j]);
  return s;
}

}  // namespace bmal
