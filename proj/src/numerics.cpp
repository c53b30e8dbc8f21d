#include "sigdim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sigdim {

SymMatrix::SymMatrix(Eigen::MatrixXd m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw IndexOutOfRange("SymMatrix requires a square matrix of dimension >= 1, got " +
                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  mat_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index p) {
  return SymMatrix(Eigen::MatrixXd::Identity(p, p));
}

SymMatrix SymMatrix::zero(Eigen::Index p) {
  return SymMatrix(Eigen::MatrixXd::Zero(p, p));
}

EigenSystem sym_eigen(const SymMatrix& m) {
  const Eigen::MatrixXd& a = m.mat();
  if (!a.allFinite()) {
    throw NonFiniteInput("matrix passed to sym_eigen contains NaN or Inf");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NonFiniteInput("eigendecomposition failed to converge");
  }

  const Eigen::Index p = a.rows();
  const Eigen::VectorXd& asc_values = solver.eigenvalues();
  const Eigen::MatrixXd& asc_vectors = solver.eigenvectors();

  // Stable descending order keeps the solver's column order among exact
  // ties (identity input stays the identity basis).
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return asc_values(x) > asc_values(y);
  });

  EigenSystem es;
  es.values.resize(p);
  es.vectors.resize(p, p);
  for (Eigen::Index l = 0; l < p; ++l) {
    es.values(l) = asc_values(order[static_cast<std::size_t>(l)]);
    Eigen::VectorXd u = asc_vectors.col(order[static_cast<std::size_t>(l)]);
    Eigen::Index pivot = 0;
    for (Eigen::Index a_idx = 1; a_idx < p; ++a_idx) {
      if (std::abs(u(a_idx)) > std::abs(u(pivot))) pivot = a_idx;
    }
    if (u(pivot) < 0.0) u = -u;
    es.vectors.col(l) = u;
  }
  return es;
}

SymMatrix inv_sqrt(const SymMatrix& m) {
  EigenSystem es = sym_eigen(m);
  const double largest = es.values(0);
  const double smallest = es.values(es.dim() - 1);
  if (!(largest > 0.0) || smallest <= 1e-12 * largest) {
    throw SingularScatter("inv_sqrt requires a positive definite matrix (smallest eigenvalue " +
                          std::to_string(smallest) + ", largest " + std::to_string(largest) + ")");
  }
  Eigen::VectorXd inv_root = es.values.array().sqrt().inverse();
  return SymMatrix(es.vectors * inv_root.asDiagonal() * es.vectors.transpose());
}

SymMatrix projection_onto_top_k(const EigenSystem& es, Eigen::Index k) {
  const Eigen::Index p = es.dim();
  if (k < 0 || k > p) {
    throw IndexOutOfRange("projection rank k = " + std::to_string(k) +
                          " outside [0, " + std::to_string(p) + "]");
  }
  if (k == 0) return SymMatrix::zero(p);
  const auto top = es.vectors.leftCols(k);
  return SymMatrix(top * top.transpose());
}

}  // namespace sigdim
