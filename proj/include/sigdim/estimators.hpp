#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "sigdim/numerics.hpp"

namespace sigdim {

// n x p data matrix, rows are observations. Requires n >= 2, p >= 2 and
// finite entries.
class Sample {
public:
  explicit Sample(Eigen::MatrixXd rows);

  Eigen::Index n() const { return rows_.rows(); }
  Eigen::Index p() const { return rows_.cols(); }
  const Eigen::MatrixXd& rows() const { return rows_; }

private:
  Eigen::MatrixXd rows_;
};

enum class EstimatorKind { Cov, SSCM, Tyler, HR };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_from_string(std::string_view s);

// Iteration control for the fixed-point solvers.
struct FixedPointConfig {
  double tol = 1e-8;
  int max_iter = 200;
};

// Defaults: the spatial median is solved to a tighter gradient tolerance
// than the scatter fixed points, so eigenvalue gaps dominate solver error.
FixedPointConfig spatial_median_config();  // {1e-9, 500}
FixedPointConfig scatter_config();         // {1e-8, 200}

struct LocationScatterPair {
  Eigen::VectorXd location;
  SymMatrix scatter;
  EstimatorKind kind;
  int iterations = 0;
  bool converged = true;
};

// Mean vector and covariance matrix with divisor n.
LocationScatterPair mean_cov(const Sample& sample);

// Minimizer of t -> sum_i ||x_i - t||, by Weiszfeld iteration with the
// Vardi-Zhang step when an iterate lands on a data point. Starts from the
// coordinatewise median. Converged when the gradient norm ||sum_i u(x_i-t)||
// falls below cfg.tol * n. Throws DegenerateSample when the points are
// concentrated on a line and NonConvergence past cfg.max_iter.
Eigen::VectorXd spatial_median(const Sample& sample, const FixedPointConfig& cfg);

// Spatial sign covariance matrix (1/n) sum_i u(x_i - location) u(...)';
// trace is 1 by construction. Throws LocationOnDatum when some observation
// lies within 1e-12 of the location.
SymMatrix sscm(const Sample& sample, const Eigen::VectorXd& location);

// Tyler's shape matrix: the det-1 solution S of
//   (1/n) sum_i u(S^{-1/2} y_i) u(S^{-1/2} y_i)' = (1/p) I,   y_i = x_i - location.
// Fixed-point iteration S <- (p/n) sum_i y_i y_i' / (y_i' S^{-1} y_i) with a
// determinant rescale each step; convergence is judged on the Frobenius norm
// of the defining-equation residual. Requires n > p.
SymMatrix tyler_shape(const Sample& sample, const Eigen::VectorXd& location,
                      const FixedPointConfig& cfg);

// Hettmansperger-Randles pair: location t and det-1 shape S solving
//   (1/n) sum_i u(S^{-1/2}(x_i - t)) = 0   and
//   (1/n) sum_i u(S^{-1/2}(x_i - t)) u(...)' = (1/p) I
// simultaneously, by alternating a whitened-space location step with a Tyler
// scatter step. Initialized from (spatial median, det-normalized SSCM); the
// returned pair is the first stationary point reached from that start.
LocationScatterPair hr_pair(const Sample& sample, const FixedPointConfig& cfg);

// Dispatch on kind. cfg controls the estimator's defining scatter fixed
// point (Tyler/HR); internal spatial-median sub-solves always run with
// spatial_median_config(). Cov and SSCM ignore cfg.
LocationScatterPair estimate_pair(const Sample& sample, EstimatorKind kind,
                                  const FixedPointConfig& cfg);

}  // namespace sigdim
