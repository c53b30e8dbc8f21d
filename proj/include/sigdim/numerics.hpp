#pragma once

#include <Eigen/Dense>

#include "sigdim/errors.hpp"

namespace sigdim {

// Symmetric p x p matrix. Construction symmetrizes as (M + M')/2 to absorb
// floating-point drift, so entries(a,b) == entries(b,a) holds exactly.
class SymMatrix {
public:
  explicit SymMatrix(Eigen::MatrixXd m);

  static SymMatrix identity(Eigen::Index p);
  static SymMatrix zero(Eigen::Index p);

  Eigen::Index dim() const { return mat_.rows(); }
  const Eigen::MatrixXd& mat() const { return mat_; }
  double operator()(Eigen::Index a, Eigen::Index b) const { return mat_(a, b); }

private:
  Eigen::MatrixXd mat_;
};

// Eigendecomposition of a symmetric matrix with a fixed presentation:
// values sorted descending, orthonormal eigenvectors as columns (column l
// pairs with values[l]), and each eigenvector's largest-magnitude entry made
// positive (magnitude ties broken by the lowest index).
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  Eigen::Index dim() const { return values.size(); }
};

// Throws NonFiniteInput on NaN/Inf entries. Deterministic for identical
// input: ordering is a stable descending sort and signs follow the
// convention above.
EigenSystem sym_eigen(const SymMatrix& m);

// Inverse symmetric square root: returns N with N*M*N == I. Requires M
// positive definite with smallest eigenvalue > 1e-12 * largest, otherwise
// throws SingularScatter.
SymMatrix inv_sqrt(const SymMatrix& m);

// Orthogonal projection onto the span of the first k eigenvectors.
// k == 0 yields the zero matrix, k == p the identity.
SymMatrix projection_onto_top_k(const EigenSystem& es, Eigen::Index k);

}  // namespace sigdim
