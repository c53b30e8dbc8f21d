#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sigdim/estimators.hpp"
#include "sigdim/numerics.hpp"

namespace sigdim {

// Unbiased-risk criteria for the retained-component count k = 0..p-1.
// sure1 penalizes via exact reconstruction derivatives, sure2 via the
// equivalent closed form in the scatter eigenvalues, sure3 drops the
// vanishing finite-sample terms of sure2.
enum class CriterionKind { Sure1, Sure2, Sure3 };
enum class SelectionRule { Argmin, ChangePoint };

std::string to_string(CriterionKind kind);
std::string to_string(SelectionRule rule);
CriterionKind criterion_from_string(std::string_view s);
SelectionRule rule_from_string(std::string_view s);

struct SureCurve {
  Eigen::VectorXd values;       // criterion value at k = 0..p-1
  CriterionKind criterion;
  std::optional<EstimatorKind> estimator;
  int n = 0;
  Eigen::VectorXd eigenvalues;  // descending scatter eigenvalues used

  Eigen::Index p() const { return values.size(); }
};

// Directional derivatives of the location and scatter estimates with
// respect to single-entry data perturbations: h[i].col(j) is the derivative
// of the location in the direction of observation i, coordinate j, and
// H[i][j] the (symmetric) derivative of the scatter.
struct DerivativeBundle {
  std::vector<Eigen::MatrixXd> h;
  std::vector<std::vector<Eigen::MatrixXd>> H;
};

// Closed-form criterion:
//   values[k] = sum_{l>k} s_l + (2 s_p / n) sum_{j<=k} sum_{l>k} (s_j+s_l)/(s_j-s_l)
//             + (s_p / n) {2p + 2(n-1)k - np}
// with s_p (or noise_var, when given) as the noise-variance plug-in.
// Eigenvalues must be strictly descending with gaps above 1e-10 * s_1.
SureCurve sure2_curve(const Eigen::VectorXd& eigenvalues, int n,
                      std::optional<double> noise_var = std::nullopt,
                      std::optional<EstimatorKind> estimator = std::nullopt);

// Large-sample criterion values[k] = sum_{l>k} s_l + s_p (2k - p); ties in
// the eigenvalues are permitted.
SureCurve sure3_curve(const Eigen::VectorXd& eigenvalues,
                      std::optional<double> noise_var = std::nullopt,
                      std::optional<EstimatorKind> estimator = std::nullopt,
                      int n = 0);

// Derivatives of the mean/covariance pair:
//   h_ij = e_j / n,  H_ij = (1/n) e_j (x_i - t)' + (1/n) (x_i - t) e_j'.
DerivativeBundle derivative_bundle_cov(const Sample& sample, const LocationScatterPair& pair);

// Derivatives of the spatial median / SSCM pair via the implicit-function
// expressions h_ij = G^{-1} A_i e_j and the four-term H_ij, where
// A_i = (I - u_i u_i') / ||y_i|| and G = sum_i A_i.
DerivativeBundle derivative_bundle_sscm(const Sample& sample, const LocationScatterPair& pair);

// Generalized degrees of freedom: sum over observations and coordinates of
// the sensitivity of the rank-k reconstruction x̂_i = t + P_k (x_i - t) to
// its own input entry, assembled from the bundle through the eigenvector
// perturbation expansion. Requires distinct eigenvalues.
double derivative_sum(const Sample& sample, const LocationScatterPair& pair,
                      const EigenSystem& es, Eigen::Index k, const DerivativeBundle& bundle);

// Derivative-based criterion; exact for Cov and SSCM, which are the only
// kinds with tractable derivative bundles (KindMismatch otherwise).
SureCurve sure1_curve(const Sample& sample, EstimatorKind kind, const FixedPointConfig& cfg);

// Smallest minimizing index (Argmin) or the change-point rule below.
int select_dimension(const SureCurve& curve, SelectionRule rule);

// Single change point in the first differences of the curve, by exhaustive
// split scan under a Gaussian likelihood with segment-specific mean and
// variance (variance floor 1e-12, minimum segment length 2). Returns
// tau + 1 for the best split, or the Argmin answer when no admissible split
// improves the no-change likelihood by more than 1e-9. Requires p >= 4.
int changepoint_select(const SureCurve& curve);

struct DimensionEstimate {
  int d_hat = 0;
  SureCurve curve;
};

// Full pipeline: estimate the location-scatter pair, eigendecompose the
// scatter, evaluate the criterion, select the dimension.
DimensionEstimate estimate_dimension(const Sample& sample, EstimatorKind estimator,
                                     CriterionKind criterion, SelectionRule rule,
                                     const FixedPointConfig& cfg);

// JSON form: {criterion, estimator, n, p, eigenvalues, values,
// d_hat_argmin, d_hat_changepoint (null when p < 4)}.
nlohmann::json curve_to_json(const SureCurve& curve);

}  // namespace sigdim
