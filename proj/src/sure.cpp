#include "sigdim/sure.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace sigdim {

namespace {

void check_gaps(const Eigen::VectorXd& s) {
  const Eigen::Index p = s.size();
  const double guard = 1e-10 * std::abs(s(0));
  for (Eigen::Index l = 0; l + 1 < p; ++l) {
    if (!(s(l) - s(l + 1) > guard)) {
      throw EigenvalueCollision("eigenvalues " + std::to_string(l) + " and " +
                                std::to_string(l + 1) + " closer than 1e-10 * s_1 (" +
                                std::to_string(s(l)) + " vs " + std::to_string(s(l + 1)) + ")");
    }
  }
}

double noise_plugin(const Eigen::VectorXd& s, std::optional<double> noise_var) {
  const double sp = noise_var.value_or(s(s.size() - 1));
  if (!(sp > 0.0)) {
    throw NoisePositivity("noise-variance plug-in must be positive, got " + std::to_string(sp));
  }
  return sp;
}

// tail[k] = sum of eigenvalues strictly beyond the first k.
Eigen::VectorXd tail_sums(const Eigen::VectorXd& s) {
  const Eigen::Index p = s.size();
  Eigen::VectorXd tail(p);
  double acc = 0.0;
  for (Eigen::Index k = p - 1; k >= 0; --k) {
    acc += s(k);
    tail(k) = acc;
  }
  return tail;
}

void check_collinearity(const Sample& sample) {
  Eigen::MatrixXd centered = sample.rows().rowwise() - sample.rows().colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() < 2 || sv(0) <= 0.0 || sv(1) <= 1e-12 * sv(0)) {
    throw DegenerateSample("observations concentrated on a line");
  }
}

int argmin_index(const Eigen::VectorXd& values) {
  int best = 0;
  for (int k = 1; k < values.size(); ++k) {
    if (values(k) < values(best)) best = k;
  }
  return best;
}

SureCurve sure1_from_pair(const Sample& sample, const LocationScatterPair& pair) {
  const Eigen::Index p = sample.p();
  const auto n = static_cast<double>(sample.n());

  const EigenSystem es = sym_eigen(pair.scatter);
  const double sp = noise_plugin(es.values, std::nullopt);
  const DerivativeBundle bundle = pair.kind == EstimatorKind::Cov
                                      ? derivative_bundle_cov(sample, pair)
                                      : derivative_bundle_sscm(sample, pair);

  const Eigen::VectorXd tail = tail_sums(es.values);
  SureCurve curve;
  curve.criterion = CriterionKind::Sure1;
  curve.estimator = pair.kind;
  curve.n = static_cast<int>(sample.n());
  curve.eigenvalues = es.values;
  curve.values.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double dof = derivative_sum(sample, pair, es, k, bundle);
    curve.values(k) = tail(k) + (2.0 * sp / n) * dof - static_cast<double>(p) * sp;
  }
  return curve;
}

}  // namespace

std::string to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::Sure1: return "sure1";
    case CriterionKind::Sure2: return "sure2";
    case CriterionKind::Sure3: return "sure3";
  }
  return "unknown";
}

std::string to_string(SelectionRule rule) {
  return rule == SelectionRule::Argmin ? "argmin" : "cp";
}

CriterionKind criterion_from_string(std::string_view s) {
  if (s == "sure1") return CriterionKind::Sure1;
  if (s == "sure2") return CriterionKind::Sure2;
  if (s == "sure3") return CriterionKind::Sure3;
  throw ConfigError("unknown criterion '" + std::string(s) + "' (expected sure1|sure2|sure3)");
}

SelectionRule rule_from_string(std::string_view s) {
  if (s == "argmin") return SelectionRule::Argmin;
  if (s == "cp") return SelectionRule::ChangePoint;
  throw ConfigError("unknown selection rule '" + std::string(s) + "' (expected argmin|cp)");
}

SureCurve sure2_curve(const Eigen::VectorXd& eigenvalues, int n,
                      std::optional<double> noise_var,
                      std::optional<EstimatorKind> estimator) {
  if (!eigenvalues.allFinite() || eigenvalues.size() < 1) {
    throw NonFiniteInput("eigenvalues passed to sure2_curve must be finite");
  }
  if (n < 2) {
    throw IndexOutOfRange("sure2_curve requires n >= 2, got " + std::to_string(n));
  }
  check_gaps(eigenvalues);
  const double sp = noise_plugin(eigenvalues, noise_var);

  const Eigen::Index p = eigenvalues.size();
  const auto nd = static_cast<double>(n);
  const auto pd = static_cast<double>(p);
  const Eigen::VectorXd tail = tail_sums(eigenvalues);

  SureCurve curve;
  curve.criterion = CriterionKind::Sure2;
  curve.estimator = estimator;
  curve.n = n;
  curve.eigenvalues = eigenvalues;
  curve.values.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    double cross = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index l = k; l < p; ++l) {
        cross += (eigenvalues(j) + eigenvalues(l)) / (eigenvalues(j) - eigenvalues(l));
      }
    }
    const double kd = static_cast<double>(k);
    curve.values(k) = tail(k) + (2.0 * sp / nd) * cross +
                      (sp / nd) * (2.0 * pd + 2.0 * (nd - 1.0) * kd - nd * pd);
  }
  return curve;
}

SureCurve sure3_curve(const Eigen::VectorXd& eigenvalues,
                      std::optional<double> noise_var,
                      std::optional<EstimatorKind> estimator, int n) {
  if (!eigenvalues.allFinite() || eigenvalues.size() < 1) {
    throw NonFiniteInput("eigenvalues passed to sure3_curve must be finite");
  }
  const double sp = noise_plugin(eigenvalues, noise_var);

  const Eigen::Index p = eigenvalues.size();
  const Eigen::VectorXd tail = tail_sums(eigenvalues);

  SureCurve curve;
  curve.criterion = CriterionKind::Sure3;
  curve.estimator = estimator;
  curve.n = n;
  curve.eigenvalues = eigenvalues;
  curve.values.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    curve.values(k) = tail(k) + sp * (2.0 * static_cast<double>(k) - static_cast<double>(p));
  }
  return curve;
}

DerivativeBundle derivative_bundle_cov(const Sample& sample, const LocationScatterPair& pair) {
  if (pair.kind != EstimatorKind::Cov) {
    throw KindMismatch("covariance derivative bundle requires a Cov pair, got " +
                       to_string(pair.kind));
  }
  const Eigen::Index n = sample.n();
  const Eigen::Index p = sample.p();
  const double inv_n = 1.0 / static_cast<double>(n);

  DerivativeBundle bundle;
  bundle.h.assign(static_cast<std::size_t>(n), inv_n * Eigen::MatrixXd::Identity(p, p));
  bundle.H.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd y = sample.rows().row(i).transpose() - pair.location;
    auto& row = bundle.H[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::MatrixXd hij = Eigen::MatrixXd::Zero(p, p);
      hij.row(j) += inv_n * y.transpose();
      hij.col(j) += inv_n * y;
      row.push_back(std::move(hij));
    }
  }
  return bundle;
}

DerivativeBundle derivative_bundle_sscm(const Sample& sample, const LocationScatterPair& pair) {
  if (pair.kind != EstimatorKind::SSCM) {
    throw KindMismatch("SSCM derivative bundle requires an SSCM pair, got " +
                       to_string(pair.kind));
  }
  check_collinearity(sample);

  const Eigen::Index n = sample.n();
  const Eigen::Index p = sample.p();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd y = sample.rows().rowwise() - pair.location.transpose();
  Eigen::VectorXd norms = y.rowwise().norm();
  if (norms.minCoeff() <= 1e-12) {
    throw LocationOnDatum("an observation coincides with the location estimate");
  }
  Eigen::MatrixXd unit = (y.array().colwise() / norms.array()).matrix();

  // A_i = (I - u_i u_i') / ||y_i|| and G = sum_i A_i.
  std::vector<Eigen::MatrixXd> a(static_cast<std::size_t>(n));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd ui = unit.row(i).transpose();
    a[static_cast<std::size_t>(i)] =
        (Eigen::MatrixXd::Identity(p, p) - ui * ui.transpose()) / norms(i);
    g += a[static_cast<std::size_t>(i)];
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> g_eigen(g);
  if (g_eigen.info() != Eigen::Success ||
      g_eigen.eigenvalues()(0) <= 1e-12 * g_eigen.eigenvalues()(p - 1)) {
    throw SingularScatter("spatial-median sensitivity matrix G is numerically singular");
  }
  const Eigen::MatrixXd g_inv = g_eigen.eigenvectors() *
                                g_eigen.eigenvalues().cwiseInverse().asDiagonal() *
                                g_eigen.eigenvectors().transpose();

  // K(v) = sum_l (A_l v) u_l' enters H_ij through v = h_ij; precompute its
  // coefficient slices M_b so each application is a weighted sum.
  std::vector<Eigen::MatrixXd> k_slice(static_cast<std::size_t>(p));
  for (Eigen::Index b = 0; b < p; ++b) {
    Eigen::MatrixXd mb = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index l = 0; l < n; ++l) {
      mb += a[static_cast<std::size_t>(l)].col(b) * unit.row(l);
    }
    k_slice[static_cast<std::size_t>(b)] = std::move(mb);
  }

  DerivativeBundle bundle;
  bundle.h.resize(static_cast<std::size_t>(n));
  bundle.H.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd& ai = a[static_cast<std::size_t>(i)];
    Eigen::MatrixXd hi = g_inv * ai;  // columns are h_ij
    auto& row = bundle.H[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      const Eigen::VectorXd hij = hi.col(j);
      Eigen::MatrixXd k_of_h = Eigen::MatrixXd::Zero(p, p);
      for (Eigen::Index b = 0; b < p; ++b) {
        k_of_h += hij(b) * k_slice[static_cast<std::size_t>(b)];
      }
      Eigen::MatrixXd hij_mat =
          inv_n * (ai.col(j) * unit.row(i) + unit.row(i).transpose() * ai.col(j).transpose() -
                   k_of_h - k_of_h.transpose());
      row.push_back(0.5 * (hij_mat + hij_mat.transpose()));
    }
    bundle.h[static_cast<std::size_t>(i)] = std::move(hi);
  }
  return bundle;
}

double derivative_sum(const Sample& sample, const LocationScatterPair& pair,
                      const EigenSystem& es, Eigen::Index k, const DerivativeBundle& bundle) {
  const Eigen::Index n = sample.n();
  const Eigen::Index p = sample.p();
  if (k < 0 || k >= p) {
    throw IndexOutOfRange("derivative_sum requires 0 <= k <= p-1, got k = " + std::to_string(k));
  }
  if (es.dim() != p) {
    throw LengthMismatch("eigen system dimension does not match the sample");
  }
  check_gaps(es.values);
  if (bundle.h.size() != static_cast<std::size_t>(n) ||
      bundle.H.size() != static_cast<std::size_t>(n)) {
    throw LengthMismatch("derivative bundle does not match the sample size");
  }

  const Eigen::MatrixXd& u = es.vectors;
  const auto uk = u.leftCols(k);
  const auto ur = u.rightCols(p - k);

  // 1 / (s_l - s_m) over retained l and discarded m.
  Eigen::MatrixXd inv_gap(k, p - k);
  for (Eigen::Index l = 0; l < k; ++l) {
    for (Eigen::Index m = k; m < p; ++m) {
      inv_gap(l, m - k) = 1.0 / (es.values(l) - es.values(m));
    }
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd y = sample.rows().row(i).transpose() - pair.location;
    const Eigen::VectorXd beta = u.transpose() * y;
    const Eigen::MatrixXd& hi = bundle.h[static_cast<std::size_t>(i)];

    // k + sum_j e_j' (I - P_k) h_ij
    double acc = static_cast<double>(k) + hi.trace();
    if (k > 0) acc -= (uk.transpose() * hi * uk).trace();

    // sum_j e_j' A_ij y with A_ij the projection derivative of H_ij; the
    // double sum is empty at k = 0.
    for (Eigen::Index j = 0; k > 0 && j < p; ++j) {
      const Eigen::MatrixXd& hij = bundle.H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const Eigen::MatrixXd w = uk.transpose() * hij * ur;
      double contrib = 0.0;
      for (Eigen::Index l = 0; l < k; ++l) {
        for (Eigen::Index m = 0; m < p - k; ++m) {
          contrib += inv_gap(l, m) * w(l, m) * (u(j, l) * beta(k + m) + u(j, k + m) * beta(l));
        }
      }
      acc += contrib;
    }
    total += acc;
  }
  return total;
}

SureCurve sure1_curve(const Sample& sample, EstimatorKind kind, const FixedPointConfig& cfg) {
  if (kind != EstimatorKind::Cov && kind != EstimatorKind::SSCM) {
    throw KindMismatch("sure1 is defined only for cov and sscm, got " + to_string(kind));
  }
  const LocationScatterPair pair = estimate_pair(sample, kind, cfg);
  return sure1_from_pair(sample, pair);
}

int select_dimension(const SureCurve& curve, SelectionRule rule) {
  if (curve.p() < 2) {
    throw CurveTooShort("selection requires a curve of length >= 2");
  }
  if (!curve.values.allFinite()) {
    throw NonFiniteInput("criterion curve contains NaN or Inf");
  }
  if (rule == SelectionRule::ChangePoint) return changepoint_select(curve);
  return argmin_index(curve.values);
}

int changepoint_select(const SureCurve& curve) {
  const Eigen::Index p = curve.p();
  if (p < 4) {
    throw CurveTooShort("change-point selection requires p >= 4, got p = " + std::to_string(p));
  }

  const Eigen::Index m = p - 1;
  Eigen::VectorXd diffs(m);
  for (Eigen::Index k = 0; k < m; ++k) diffs(k) = curve.values(k + 1) - curve.values(k);

  // Gaussian log-likelihood of a segment under its own MLE mean/variance.
  const auto segment_ll = [&diffs](Eigen::Index a, Eigen::Index b) {
    const auto len = static_cast<double>(b - a + 1);
    const double mean = diffs.segment(a, b - a + 1).mean();
    double var = (diffs.segment(a, b - a + 1).array() - mean).square().sum() / len;
    var = std::max(var, 1e-12);
    return -0.5 * len * (std::log(2.0 * std::numbers::pi * var) + 1.0);
  };

  const double no_change = segment_ll(0, m - 1);
  double best_improvement = -std::numeric_limits<double>::infinity();
  Eigen::Index best_tau = -1;
  for (Eigen::Index tau = 1; tau + 3 <= m; ++tau) {  // both segments length >= 2
    const double improvement = segment_ll(0, tau) + segment_ll(tau + 1, m - 1) - no_change;
    if (improvement > best_improvement) {
      best_improvement = improvement;
      best_tau = tau;
    }
  }

  if (best_tau >= 0 && best_improvement > 1e-9) {
    return static_cast<int>(best_tau) + 1;
  }
  return argmin_index(curve.values);
}

DimensionEstimate estimate_dimension(const Sample& sample, EstimatorKind estimator,
                                     CriterionKind criterion, SelectionRule rule,
                                     const FixedPointConfig& cfg) {
  if (criterion == CriterionKind::Sure1 && estimator != EstimatorKind::Cov &&
      estimator != EstimatorKind::SSCM) {
    throw KindMismatch("sure1 is defined only for cov and sscm, got " + to_string(estimator));
  }

  const LocationScatterPair pair = estimate_pair(sample, estimator, cfg);
  DimensionEstimate out;
  switch (criterion) {
    case CriterionKind::Sure1:
      out.curve = sure1_from_pair(sample, pair);
      break;
    case CriterionKind::Sure2:
      out.curve = sure2_curve(sym_eigen(pair.scatter).values, static_cast<int>(sample.n()),
                              std::nullopt, estimator);
      break;
    case CriterionKind::Sure3:
      out.curve = sure3_curve(sym_eigen(pair.scatter).values, std::nullopt, estimator,
                              static_cast<int>(sample.n()));
      break;
  }
  out.d_hat = select_dimension(out.curve, rule);
  return out;
}

nlohmann::json curve_to_json(const SureCurve& curve) {
  nlohmann::json j;
  j["criterion"] = to_string(curve.criterion);
  j["estimator"] = curve.estimator ? nlohmann::json(to_string(*curve.estimator))
                                   : nlohmann::json(nullptr);
  j["n"] = curve.n;
  j["p"] = static_cast<int>(curve.p());
  j["eigenvalues"] = std::vector<double>(curve.eigenvalues.begin(), curve.eigenvalues.end());
  j["values"] = std::vector<double>(curve.values.begin(), curve.values.end());
  j["d_hat_argmin"] = select_dimension(curve, SelectionRule::Argmin);
  j["d_hat_changepoint"] =
      curve.p() >= 4 ? nlohmann::json(changepoint_select(curve)) : nlohmann::json(nullptr);
  return j;
}

}  // namespace sigdim
