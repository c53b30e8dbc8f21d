#include "sigdim/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sigdim {

namespace {

// Coincidence threshold for "iterate sits on a data point" tests, relative
// to the spread of the sample.
double hit_threshold(const Eigen::MatrixXd& rows) {
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const double spread = (rows.rowwise() - mean).rowwise().norm().maxCoeff();
  return 1e-13 * std::max(1.0, spread);
}

double coordinatewise_median(std::vector<double>& v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  auto lower = std::max_element(v.begin(), mid);
  return 0.5 * (*lower + *mid);
}

// Symmetric square root and its inverse from one eigendecomposition.
// Throws SingularScatter when the matrix is not safely positive definite.
struct MatrixRoots {
  Eigen::MatrixXd half;
  Eigen::MatrixXd inv_half;
};

MatrixRoots symmetric_roots(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
  if (solver.info() != Eigen::Success) {
    throw SingularScatter("eigendecomposition of scatter iterate failed");
  }
  const Eigen::VectorXd& vals = solver.eigenvalues();
  const double largest = vals(vals.size() - 1);
  const double smallest = vals(0);
  if (!(largest > 0.0) || smallest <= 1e-12 * largest) {
    throw SingularScatter("scatter iterate lost positive definiteness (eigenvalues in [" +
                          std::to_string(smallest) + ", " + std::to_string(largest) + "])");
  }
  const Eigen::MatrixXd& u = solver.eigenvectors();
  MatrixRoots roots;
  roots.half = u * vals.array().sqrt().matrix().asDiagonal() * u.transpose();
  roots.inv_half = u * vals.array().rsqrt().matrix().asDiagonal() * u.transpose();
  return roots;
}

// Rescale a positive definite matrix to determinant 1.
Eigen::MatrixXd unit_determinant(const Eigen::MatrixXd& s) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularScatter("determinant normalization requires a positive definite matrix");
  }
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return s * std::exp(-log_det / static_cast<double>(s.rows()));
}

// Centered rows and their norms; throws LocationOnDatum when a point
// coincides with the location (tolerance 1e-12 in Euclidean norm).
Eigen::MatrixXd center_rows(const Sample& sample, const Eigen::VectorXd& location) {
  if (location.size() != sample.p()) {
    throw LengthMismatch("location has dimension " + std::to_string(location.size()) +
                         ", sample has p = " + std::to_string(sample.p()));
  }
  Eigen::MatrixXd y = sample.rows().rowwise() - location.transpose();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    if (y.row(i).norm() <= 1e-12) {
      throw LocationOnDatum("observation " + std::to_string(i) + " coincides with the location");
    }
  }
  return y;
}

}  // namespace

Sample::Sample(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 2 || rows_.cols() < 2) {
    throw DegenerateSample("sample must have n >= 2 and p >= 2, got n = " +
                           std::to_string(rows_.rows()) + ", p = " + std::to_string(rows_.cols()));
  }
  if (!rows_.allFinite()) {
    throw NonFiniteInput("sample contains NaN or Inf entries");
  }
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Cov: return "cov";
    case EstimatorKind::SSCM: return "sscm";
    case EstimatorKind::Tyler: return "tyler";
    case EstimatorKind::HR: return "hr";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(std::string_view s) {
  if (s == "cov") return EstimatorKind::Cov;
  if (s == "sscm") return EstimatorKind::SSCM;
  if (s == "tyler") return EstimatorKind::Tyler;
  if (s == "hr") return EstimatorKind::HR;
  throw ConfigError("unknown estimator '" + std::string(s) + "' (expected cov|sscm|tyler|hr)");
}

FixedPointConfig spatial_median_config() { return FixedPointConfig{1e-9, 500}; }
FixedPointConfig scatter_config() { return FixedPointConfig{1e-8, 200}; }

LocationScatterPair mean_cov(const Sample& sample) {
  const auto n = static_cast<double>(sample.n());
  Eigen::VectorXd mean = sample.rows().colwise().mean().transpose();
  Eigen::MatrixXd centered = sample.rows().rowwise() - mean.transpose();
  SymMatrix scatter(centered.transpose() * centered / n);
  return LocationScatterPair{std::move(mean), std::move(scatter), EstimatorKind::Cov, 0, true};
}

namespace {

Eigen::VectorXd spatial_median_impl(const Sample& sample, const FixedPointConfig& cfg,
                                    int* iterations_out) {
  const Eigen::Index n = sample.n();
  const Eigen::Index p = sample.p();
  const Eigen::MatrixXd& x = sample.rows();

  {
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() < 2 || sv(0) <= 0.0 || sv(1) <= 1e-12 * sv(0)) {
      throw DegenerateSample("spatial median requires points not concentrated on a line");
    }
  }

  Eigen::VectorXd t(p);
  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = x(i, j);
    t(j) = coordinatewise_median(column);
  }

  const double hit_eps = hit_threshold(x);
  const double grad_tol = cfg.tol * static_cast<double>(n);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    Eigen::VectorXd dist = (x.rowwise() - t.transpose()).rowwise().norm();

    int hits = 0;
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(p);
    double weight_sum = 0.0;
    Eigen::VectorXd weighted_mean = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dist(i) <= hit_eps) {
        ++hits;
        continue;
      }
      const double w = 1.0 / dist(i);
      gradient += w * (x.row(i).transpose() - t);
      weight_sum += w;
      weighted_mean += w * x.row(i).transpose();
    }

    const double grad_norm = gradient.norm();
    const bool optimal = (hits == n) ||
                         (hits > 0 && grad_norm <= static_cast<double>(hits)) ||
                         (hits == 0 && grad_norm <= grad_tol);
    if (optimal) {
      if (iterations_out != nullptr) *iterations_out = iter;
      return t;
    }

    Eigen::VectorXd weiszfeld = weighted_mean / weight_sum;
    if (hits == 0) {
      t = weiszfeld;
    } else {
      // Vardi-Zhang step: pull the plain Weiszfeld target back toward the
      // data point the iterate currently sits on.
      const double pull = static_cast<double>(hits) / grad_norm;
      t = (1.0 - pull) * weiszfeld + pull * t;
    }
  }
  throw NonConvergence("spatial median gradient above tolerance after " +
                       std::to_string(cfg.max_iter) + " iterations");
}

Eigen::MatrixXd tyler_impl(const Sample& sample, const Eigen::VectorXd& location,
                           const FixedPointConfig& cfg, int* iterations_out) {

  const Eigen::Index n = sample.n();
  const Eigen::Index p = sample.p();
  if (n <= p) {
    throw DegenerateSample("Tyler's shape matrix requires n > p, got n = " +
                           std::to_string(n) + ", p = " + std::to_string(p));
  }
  const Eigen::MatrixXd y = center_rows(sample, location);
  const double inv_p = 1.0 / static_cast<double>(p);

  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(p, p);
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    const MatrixRoots roots = symmetric_roots(s);
    Eigen::MatrixXd z = y * roots.inv_half;  // rows are S^{-1/2} y_i
    z.rowwise().normalize();
    Eigen::MatrixXd sign_cov = z.transpose() * z / static_cast<double>(n);

    const double residual = (sign_cov - inv_p * Eigen::MatrixXd::Identity(p, p)).norm();
    if (residual <= cfg.tol) {
      if (iterations_out != nullptr) *iterations_out = iter;
      return s;
    }

    // (p/n) sum_i y_i y_i' / (y_i' S^{-1} y_i) == p * S^{1/2} sign_cov S^{1/2}
    Eigen::MatrixXd next = static_cast<double>(p) * roots.half * sign_cov * roots.half;
    s = unit_determinant(0.5 * (next + next.transpose()));
  }
  throw NonConvergence("Tyler fixed-point residual above tolerance after " +
                       std::to_string(cfg.max_iter) + " iterations");
}

}  // namespace

Eigen::VectorXd spatial_median(const Sample& sample, const FixedPointConfig& cfg) {
  return spatial_median_impl(sample, cfg, nullptr);
}

SymMatrix sscm(const Sample& sample, const Eigen::VectorXd& location) {
  Eigen::MatrixXd y = center_rows(sample, location);
  y.rowwise().normalize();
  return SymMatrix(y.transpose() * y / static_cast<double>(sample.n()));
}

SymMatrix tyler_shape(const Sample& sample, const Eigen::VectorXd& location,
                      const FixedPointConfig& cfg) {
  return SymMatrix(tyler_impl(sample, location, cfg, nullptr));
}

LocationScatterPair hr_pair(const Sample& sample, const FixedPointConfig& cfg) {
  const Eigen::Index n = sample.n();
  const Eigen::Index p = sample.p();
  if (n <= p) {
    throw DegenerateSample("Hettmansperger-Randles pair requires n > p, got n = " +
                           std::to_string(n) + ", p = " + std::to_string(p));
  }
  const double inv_p = 1.0 / static_cast<double>(p);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);

  Eigen::VectorXd t = spatial_median(sample, spatial_median_config());
  Eigen::MatrixXd s = unit_determinant(sscm(sample, t).mat());

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    MatrixRoots roots = symmetric_roots(s);
    Eigen::MatrixXd z = sample.rows().rowwise() - t.transpose();
    z *= roots.inv_half;
    Eigen::VectorXd norms = z.rowwise().norm();
    if (norms.minCoeff() <= 1e-12) {
      throw LocationOnDatum("H-R iterate coincides with an observation");
    }

    Eigen::MatrixXd unit = (z.array().colwise() / norms.array()).matrix();
    Eigen::VectorXd sign_mean = unit.colwise().mean().transpose();
    Eigen::MatrixXd sign_cov = unit.transpose() * unit / static_cast<double>(n);

    const double location_residual = sign_mean.norm();
    const double scatter_residual = (sign_cov - inv_p * identity).norm();
    if (location_residual <= cfg.tol && scatter_residual <= cfg.tol) {
      return LocationScatterPair{std::move(t), SymMatrix(std::move(s)),
                                 EstimatorKind::HR, iter, true};
    }

    // Location step in whitened coordinates, mapped back through S^{1/2}.
    const double inv_norm_sum = norms.cwiseInverse().sum();
    t += roots.half * (unit.colwise().sum().transpose() / inv_norm_sum);

    // Tyler scatter step at the updated location.
    z = sample.rows().rowwise() - t.transpose();
    z *= roots.inv_half;
    norms = z.rowwise().norm();
    if (norms.minCoeff() <= 1e-12) {
      throw LocationOnDatum("H-R iterate coincides with an observation");
    }
    unit = (z.array().colwise() / norms.array()).matrix();
    sign_cov = unit.transpose() * unit / static_cast<double>(n);
    Eigen::MatrixXd next = static_cast<double>(p) * roots.half * sign_cov * roots.half;
    s = unit_determinant(0.5 * (next + next.transpose()));
  }
  throw NonConvergence("H-R residuals above tolerance after " +
                       std::to_string(cfg.max_iter) + " cycles");
}

LocationScatterPair estimate_pair(const Sample& sample, EstimatorKind kind,
                                  const FixedPointConfig& cfg) {
  switch (kind) {
    case EstimatorKind::Cov:
      return mean_cov(sample);
    case EstimatorKind::SSCM: {
      int iters = 0;
      Eigen::VectorXd t = spatial_median_impl(sample, spatial_median_config(), &iters);
      SymMatrix s = sscm(sample, t);
      return LocationScatterPair{std::move(t), std::move(s), EstimatorKind::SSCM, iters, true};
    }
    case EstimatorKind::Tyler: {
      Eigen::VectorXd t = spatial_median_impl(sample, spatial_median_config(), nullptr);
      int iters = 0;
      SymMatrix s(tyler_impl(sample, t, cfg, &iters));
      return LocationScatterPair{std::move(t), std::move(s), EstimatorKind::Tyler, iters, true};
    }
    case EstimatorKind::HR:
      return hr_pair(sample, cfg);
  }
  throw ConfigError("unhandled estimator kind");
}

}  // namespace sigdim
