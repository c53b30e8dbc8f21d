#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sigdim/simulate.hpp"
#include "sigdim/sure.hpp"
#include "test_util.hpp"

using namespace sigdim;
using testutil::rel_err;
using testutil::rel_frobenius;

namespace {

const FixedPointConfig kTightMedian{1e-13, 200000};

struct PairEstimate {
  Eigen::VectorXd location;
  Eigen::MatrixXd scatter;
};

PairEstimate cov_of(const Eigen::MatrixXd& rows) {
  const LocationScatterPair pair = mean_cov(Sample(rows));
  return {pair.location, pair.scatter.mat()};
}

PairEstimate sscm_of(const Eigen::MatrixXd& rows) {
  const Sample s(rows);
  const Eigen::VectorXd t = spatial_median(s, kTightMedian);
  return {t, sscm(s, t).mat()};
}

// Central finite differences of (location, scatter) under a single-entry
// perturbation, with full re-estimation on both sides.
template <typename Fn>
PairEstimate central_difference(const Eigen::MatrixXd& rows, Eigen::Index i, Eigen::Index j,
                                double eps, Fn estimate) {
  Eigen::MatrixXd plus = rows;
  Eigen::MatrixXd minus = rows;
  plus(i, j) += eps;
  minus(i, j) -= eps;
  const PairEstimate hi = estimate(plus);
  const PairEstimate lo = estimate(minus);
  return {(hi.location - lo.location) / (2.0 * eps), (hi.scatter - lo.scatter) / (2.0 * eps)};
}

// Rank-k reconstruction entry (i,j) recomputed from scratch, for the
// end-to-end derivative oracle.
double reconstruction_entry(const Eigen::MatrixXd& rows, Eigen::Index i, Eigen::Index j,
                            Eigen::Index k) {
  const PairEstimate est = sscm_of(rows);
  const EigenSystem es = sym_eigen(SymMatrix(est.scatter));
  const Eigen::MatrixXd pk = projection_onto_top_k(es, k).mat();
  const Eigen::VectorXd xhat =
      est.location + pk * (rows.row(i).transpose() - est.location);
  return xhat(j);
}

LocationScatterPair sscm_pair_of(const Sample& s) {
  Eigen::VectorXd t = spatial_median(s, kTightMedian);
  SymMatrix scatter = sscm(s, t);
  return LocationScatterPair{std::move(t), std::move(scatter), EstimatorKind::SSCM, 0, true};
}

SureCurve curve_from_values(std::vector<double> values) {
  SureCurve curve;
  curve.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  curve.criterion = CriterionKind::Sure2;
  curve.n = 100;
  curve.eigenvalues = Eigen::VectorXd::LinSpaced(curve.values.size(), 2.0, 1.0);
  return curve;
}

}  // namespace

TEST_CASE("sure2 hand-evaluated two-eigenvalue case") {
  Eigen::VectorXd s(2);
  s << 4.0, 1.0;
  const SureCurve curve = sure2_curve(s, 10);
  CHECK(curve.values(0) == doctest::Approx(3.4).epsilon(1e-12));
  CHECK(curve.values(1) == doctest::Approx(23.0 / 15.0).epsilon(1e-12));
  CHECK(select_dimension(curve, SelectionRule::Argmin) == 1);
}

TEST_CASE("sure2 is homogeneous in the eigenvalues") {
  Eigen::VectorXd s(4);
  s << 7.0, 4.0, 2.0, 0.5;
  const SureCurve base = sure2_curve(s, 40);
  const SureCurve scaled = sure2_curve(3.5 * s, 40);
  for (int k = 0; k < 4; ++k) {
    CHECK(rel_err(scaled.values(k), 3.5 * base.values(k)) < 1e-12);
  }
  CHECK(select_dimension(base, SelectionRule::Argmin) ==
        select_dimension(scaled, SelectionRule::Argmin));
}

TEST_CASE("sure2 rejects eigenvalue collisions and non-positive noise") {
  Eigen::VectorXd collide(3);
  collide << 4.0, 4.0 - 1e-15, 1.0;
  CHECK_THROWS_AS(sure2_curve(collide, 10), EigenvalueCollision);

  Eigen::VectorXd negative(3);
  negative << 4.0, 1.0, -0.1;
  CHECK_THROWS_AS(sure2_curve(negative, 10), NoisePositivity);
}

TEST_CASE("sure3 hand case and collapse on equal eigenvalues") {
  Eigen::VectorXd s(2);
  s << 4.0, 1.0;
  const SureCurve curve = sure3_curve(s);
  CHECK(curve.values(0) == doctest::Approx(3.0));
  CHECK(curve.values(1) == doctest::Approx(1.0));
  CHECK(select_dimension(curve, SelectionRule::Argmin) == 1);

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 0.7);
  const SureCurve noise = sure3_curve(flat);
  for (int k = 0; k < 5; ++k) CHECK(noise.values(k) == doctest::Approx(0.7 * k));
  CHECK(select_dimension(noise, SelectionRule::Argmin) == 0);

  const SureCurve scaled = sure3_curve(2.0 * flat);
  for (int k = 0; k < 5; ++k) CHECK(scaled.values(k) == doctest::Approx(2.0 * noise.values(k)));
}

TEST_CASE("sure2 minus sure3 equals the dropped finite-sample terms") {
  Rng rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd s(6);
    s << 9.0, 6.5, 4.0, 2.2, 1.4, 0.8;
    for (int j = 0; j < 6; ++j) s(j) *= (1.0 + 0.05 * rng.uniform01());
    std::sort(s.data(), s.data() + 6, std::greater<double>());
    const int n = 30;
    const SureCurve two = sure2_curve(s, n);
    const SureCurve three = sure3_curve(s);
    const double sp = s(5);
    for (int k = 0; k < 6; ++k) {
      double cross = 0.0;
      for (int j = 0; j < k; ++j) {
        for (int l = k; l < 6; ++l) cross += (s(j) + s(l)) / (s(j) - s(l));
      }
      const double expected = (2.0 * sp / n) * cross + (sp / n) * (2.0 * 6 - 2.0 * k);
      CHECK(std::abs((two.values(k) - three.values(k)) - expected) < 1e-10);
    }
  }
}

TEST_CASE("covariance bundle has the stated structure") {
  Rng rng(42);
  const Sample s = testutil::random_sample(6, 3, rng);
  const LocationScatterPair pair = mean_cov(s);
  const DerivativeBundle bundle = derivative_bundle_cov(s, pair);

  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd expected = Eigen::VectorXd::Zero(3);
      expected(j) = 1.0 / 6.0;
      CHECK((bundle.h[i].col(j) - expected).norm() < 1e-15);
    }
  }
}

TEST_CASE("covariance bundle vanishes for a datum at the mean") {
  Eigen::MatrixXd rows(3, 2);
  rows << 0.0, 0.0, 2.0, 2.0, 1.0, 1.0;  // third row equals the mean
  const Sample s(rows);
  const LocationScatterPair pair = mean_cov(s);
  const DerivativeBundle bundle = derivative_bundle_cov(s, pair);
  for (int j = 0; j < 2; ++j) CHECK(bundle.H[2][j].norm() < 1e-14);
}

TEST_CASE("covariance bundle matches central finite differences") {
  Rng rng(43);
  const Sample s = testutil::random_sample(8, 3, rng);
  const LocationScatterPair pair = mean_cov(s);
  const DerivativeBundle bundle = derivative_bundle_cov(s, pair);

  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 3; ++j) {
      const PairEstimate fd = central_difference(s.rows(), i, j, 1e-6, cov_of);
      CHECK((bundle.h[i].col(j) - fd.location).norm() / fd.location.norm() < 1e-5);
      CHECK(rel_frobenius(bundle.H[i][j], fd.scatter) < 1e-5);
    }
  }
}

TEST_CASE("sscm bundle: cross sample gives a diagonal sensitivity matrix") {
  const double a = 2.0;
  Eigen::MatrixXd rows(4, 2);
  rows << a, 0, -a, 0, 0, a, 0, -a;
  const Sample s(rows);
  const LocationScatterPair pair = sscm_pair_of(s);
  CHECK(pair.location.norm() < 1e-12);

  // G = sum_i (I - u_i u_i') / ||y_i|| is a positive multiple of identity
  // here, so h_ij is proportional to A_i e_j.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < 4; ++i) {
    const Eigen::VectorXd y = rows.row(i).transpose() - pair.location;
    const Eigen::VectorXd u = y.normalized();
    g += (Eigen::MatrixXd::Identity(2, 2) - u * u.transpose()) / y.norm();
  }
  CHECK(std::abs(g(0, 1)) < 1e-12);
  CHECK(std::abs(g(1, 0)) < 1e-12);
  CHECK(g(0, 0) == doctest::Approx(g(1, 1)));

  const DerivativeBundle bundle = derivative_bundle_sscm(s, pair);
  for (int i = 0; i < 4; ++i) {
    const Eigen::VectorXd y = rows.row(i).transpose();
    const Eigen::VectorXd u = y.normalized();
    const Eigen::MatrixXd ai = (Eigen::MatrixXd::Identity(2, 2) - u * u.transpose()) / y.norm();
    for (int j = 0; j < 2; ++j) {
      const Eigen::VectorXd expected = ai.col(j) / g(0, 0);
      CHECK((bundle.h[i].col(j) - expected).norm() < 1e-12);
    }
  }
}

TEST_CASE("sscm bundle matches central finite differences") {
  Rng rng(44);
  const Sample s = testutil::random_sample(12, 3, rng);
  const LocationScatterPair pair = sscm_pair_of(s);
  const DerivativeBundle bundle = derivative_bundle_sscm(s, pair);

  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 3; ++j) {
      const PairEstimate fd = central_difference(s.rows(), i, j, 1e-5, sscm_of);
      CHECK((bundle.h[i].col(j) - fd.location).norm() / fd.location.norm() < 1e-4);
      CHECK(rel_frobenius(bundle.H[i][j], fd.scatter) < 1e-4);
    }
  }
}

TEST_CASE("derivative_sum for the covariance bundle at k = 0 is exactly p") {
  Rng rng(45);
  const Sample s = testutil::random_sample(10, 4, rng);
  const LocationScatterPair pair = mean_cov(s);
  const EigenSystem es = sym_eigen(pair.scatter);
  const DerivativeBundle bundle = derivative_bundle_cov(s, pair);
  CHECK(derivative_sum(s, pair, es, 0, bundle) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("derivative_sum for the covariance bundle matches the closed form") {
  Rng rng(46);
  const Eigen::Index n = 25, p = 5;
  const Sample s = testutil::random_sample(n, p, rng);
  const LocationScatterPair pair = mean_cov(s);
  const EigenSystem es = sym_eigen(pair.scatter);
  const DerivativeBundle bundle = derivative_bundle_cov(s, pair);

  for (Eigen::Index k = 0; k < p; ++k) {
    double cross = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index l = k; l < p; ++l) {
        cross += (es.values(j) + es.values(l)) / (es.values(j) - es.values(l));
      }
    }
    const double expected = cross + static_cast<double>(p) +
                            static_cast<double>(n - 1) * static_cast<double>(k);
    CHECK(rel_err(derivative_sum(s, pair, es, k, bundle), expected) < 1e-6);
  }
}

TEST_CASE("derivative_sum for the sscm bundle matches the end-to-end oracle") {
  Rng rng(47);
  const Eigen::Index n = 14, p = 4;
  const Sample s = testutil::random_sample(n, p, rng);
  const LocationScatterPair pair = sscm_pair_of(s);
  const EigenSystem es = sym_eigen(pair.scatter);
  const DerivativeBundle bundle = derivative_bundle_sscm(s, pair);

  const double eps = 1e-5;
  for (Eigen::Index k : {Eigen::Index(0), Eigen::Index(1), Eigen::Index(3)}) {
    double fd_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::MatrixXd plus = s.rows();
        Eigen::MatrixXd minus = s.rows();
        plus(i, j) += eps;
        minus(i, j) -= eps;
        fd_sum += (reconstruction_entry(plus, i, j, k) - reconstruction_entry(minus, i, j, k)) /
                  (2.0 * eps);
      }
    }
    CHECK(rel_err(derivative_sum(s, pair, es, k, bundle), fd_sum) < 1e-3);
  }
}

TEST_CASE("sure1 with covariance equals sure2 pointwise") {
  Rng rng(48);
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::Index n = 40, p = 5;
    const Sample s = testutil::random_sample(n, p, rng);
    const SureCurve one = sure1_curve(s, EstimatorKind::Cov, scatter_config());
    const SureCurve two = sure2_curve(one.eigenvalues, static_cast<int>(n));
    for (Eigen::Index k = 0; k < p; ++k) {
      CHECK(rel_err(one.values(k), two.values(k)) < 1e-8);
    }
  }
}

TEST_CASE("sure1 on pure noise selects dimension zero") {
  int correct = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Rng rng(substream_seed(4242, 0, static_cast<std::uint64_t>(rep)));
    const Sample s = testutil::random_sample(500, 2, rng);
    const SureCurve curve = sure1_curve(s, EstimatorKind::Cov, scatter_config());
    if (select_dimension(curve, SelectionRule::Argmin) == 0) ++correct;
  }
  CHECK(correct >= 90);
}

TEST_CASE("sure1 rejects estimators without derivative bundles") {
  Rng rng(49);
  const Sample s = testutil::random_sample(30, 3, rng);
  CHECK_THROWS_AS(sure1_curve(s, EstimatorKind::Tyler, scatter_config()), KindMismatch);
  CHECK_THROWS_AS(sure1_curve(s, EstimatorKind::HR, scatter_config()), KindMismatch);
  CHECK_THROWS_AS(
      estimate_dimension(s, EstimatorKind::Tyler, CriterionKind::Sure1, SelectionRule::Argmin,
                         scatter_config()),
      KindMismatch);
}

TEST_CASE("select_dimension basics") {
  CHECK(select_dimension(curve_from_values({3.4, 23.0 / 15.0}), SelectionRule::Argmin) == 1);
  CHECK(select_dimension(curve_from_values({1, 2, 3, 4, 5}), SelectionRule::Argmin) == 0);
  CHECK(select_dimension(curve_from_values({5, 4, 1, 3, 4, 1, 2}), SelectionRule::Argmin) == 2);
}

TEST_CASE("changepoint agrees with argmin on a V-shaped curve") {
  std::vector<double> values(12);
  for (int k = 0; k < 12; ++k) values[static_cast<std::size_t>(k)] = std::abs(k - 5) + 1.0;
  const SureCurve curve = curve_from_values(values);
  CHECK(select_dimension(curve, SelectionRule::Argmin) == 5);
  CHECK(changepoint_select(curve) == 5);
}

TEST_CASE("changepoint beats argmin on a keep-decreasing curve") {
  const int p = 12, d = 4;
  std::vector<double> values(p);
  for (int k = 0; k < p; ++k) {
    values[static_cast<std::size_t>(k)] =
        k <= d ? -5.0 * k : -5.0 * d - 0.01 * (k - d);
  }
  const SureCurve curve = curve_from_values(values);
  CHECK(select_dimension(curve, SelectionRule::Argmin) == p - 1);
  CHECK(changepoint_select(curve) == d);
}

TEST_CASE("changepoint falls back to argmin on constant differences") {
  std::vector<double> values(8);
  for (int k = 0; k < 8; ++k) values[static_cast<std::size_t>(k)] = 10.0 - k;
  const SureCurve curve = curve_from_values(values);
  CHECK(changepoint_select(curve) == select_dimension(curve, SelectionRule::Argmin));
  CHECK(changepoint_select(curve) == 7);
}

TEST_CASE("changepoint requires at least four criterion values") {
  CHECK_THROWS_AS(changepoint_select(curve_from_values({3, 2, 1})), CurveTooShort);
  CHECK(select_dimension(curve_from_values({3, 2, 1}), SelectionRule::Argmin) == 2);
}

TEST_CASE("changepoint on p=4 has no admissible split and falls back") {
  // Three differences cannot be cut into two segments of length >= 2.
  const SureCurve curve = curve_from_values({9, 1, 5, 6});
  CHECK(changepoint_select(curve) == 1);
  CHECK(select_dimension(curve, SelectionRule::ChangePoint) == 1);
}

TEST_CASE("pure-noise Gaussian pipeline picks zero with sure3") {
  int correct = 0;
  ModelSpec spec;
  spec.p = 5;
  spec.d = 0;
  spec.noise_var = 1.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Sample s = sample_elliptical_t(spec, 2000, substream_seed(777, 1, rep));
    const DimensionEstimate est = estimate_dimension(
        s, EstimatorKind::Cov, CriterionKind::Sure3, SelectionRule::Argmin, scatter_config());
    if (est.d_hat == 0) ++correct;
  }
  CHECK(correct >= 95);
}

TEST_CASE("heavy-tailed factor model is recovered by tyler with sure2") {
  ModelSpec spec;
  spec.p = 10;
  spec.d = 6;
  spec.nu = 1.0;
  spec.noise_var = 0.5;
  spec.signal_vars.assign(6, 2.0);
  int correct = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Sample s = sample_elliptical_t(spec, 2000, substream_seed(778, 2, rep));
    const DimensionEstimate est = estimate_dimension(
        s, EstimatorKind::Tyler, CriterionKind::Sure2, SelectionRule::Argmin, scatter_config());
    if (est.d_hat == 6) ++correct;
  }
  CHECK(correct >= 45);  // >= 90% of 50 replicates
}

TEST_CASE("scaling the data leaves the tyler sure2 estimate unchanged") {
  ModelSpec spec;
  spec.p = 6;
  spec.d = 2;
  spec.nu = 3.0;
  spec.noise_var = 0.5;
  spec.signal_vars = {3.0, 2.0};
  const Sample s = sample_elliptical_t(spec, 400, 909);
  const Sample scaled(17.5 * s.rows());

  const DimensionEstimate a = estimate_dimension(s, EstimatorKind::Tyler, CriterionKind::Sure2,
                                                 SelectionRule::Argmin, scatter_config());
  const DimensionEstimate b = estimate_dimension(scaled, EstimatorKind::Tyler,
                                                 CriterionKind::Sure2, SelectionRule::Argmin,
                                                 scatter_config());
  CHECK(a.d_hat == b.d_hat);
}

TEST_CASE("curves are invariant under a fixed rotation of the data") {
  ModelSpec spec;
  spec.p = 5;
  spec.d = 2;
  spec.nu = 5.0;
  spec.noise_var = 0.5;
  spec.signal_vars = {3.0, 2.0};
  const Sample s = sample_elliptical_t(spec, 300, 313);

  Rng rot_rng(314);
  const Eigen::MatrixXd o = random_orthogonal(5, rot_rng);
  const Sample rotated(s.rows() * o.transpose());

  const FixedPointConfig tight{1e-11, 5000};
  for (EstimatorKind kind :
       {EstimatorKind::Cov, EstimatorKind::SSCM, EstimatorKind::Tyler, EstimatorKind::HR}) {
    const Eigen::VectorXd base = sym_eigen(estimate_pair(s, kind, tight).scatter).values;
    const Eigen::VectorXd mapped = sym_eigen(estimate_pair(rotated, kind, tight).scatter).values;
    const SureCurve c1 = sure2_curve(base, 300);
    const SureCurve c2 = sure2_curve(mapped, 300);
    for (int k = 0; k < 5; ++k) CHECK(std::abs(c1.values(k) - c2.values(k)) < 1e-8);
  }
}

TEST_CASE("sure2 with the true noise variance is an unbiased risk estimate") {
  // Signal-plus-noise draws with the noiseless signals retained: the mean
  // criterion value must match the mean reconstruction risk within
  // Monte Carlo error (paired comparison, three standard errors).
  ModelSpec spec;
  spec.p = 6;
  spec.d = 3;
  spec.noise_var = 0.5;
  spec.signal_vars = {2.5, 1.8, 1.2};
  const int n = 100, reps = 2000;

  for (int k : {1, 3, 5}) {
    double diff_sum = 0.0, diff_sq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      const GaussianFactorSample draw =
          sample_gaussian_factor(spec, n, substream_seed(5150, static_cast<std::uint64_t>(k), rep));
      const LocationScatterPair pair = mean_cov(draw.sample);
      const EigenSystem es = sym_eigen(pair.scatter);

      const SureCurve curve = sure2_curve(es.values, n, spec.noise_var);
      const Eigen::MatrixXd pk = projection_onto_top_k(es, k).mat();
      double risk = 0.0;
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd xhat =
            pair.location + pk * (draw.sample.rows().row(i).transpose() - pair.location);
        risk += (xhat - draw.signals.row(i).transpose()).squaredNorm();
      }
      risk /= static_cast<double>(n);

      const double diff = curve.values(k) - risk;
      diff_sum += diff;
      diff_sq += diff * diff;
    }
    const double mean_diff = diff_sum / reps;
    const double var_diff = (diff_sq - reps * mean_diff * mean_diff) / (reps - 1);
    const double se = std::sqrt(var_diff / reps);
    CHECK(std::abs(mean_diff) <= 3.0 * se);
  }
}

TEST_CASE("curve serializes to the documented JSON schema") {
  Eigen::VectorXd s(4);
  s << 5.0, 3.0, 1.5, 0.7;
  SureCurve curve = sure2_curve(s, 50, std::nullopt, EstimatorKind::Tyler);
  const nlohmann::json j = curve_to_json(curve);
  CHECK(j.at("criterion") == "sure2");
  CHECK(j.at("estimator") == "tyler");
  CHECK(j.at("n") == 50);
  CHECK(j.at("p") == 4);
  CHECK(j.at("eigenvalues").size() == 4);
  CHECK(j.at("values").size() == 4);
  CHECK(j.at("d_hat_argmin").is_number_integer());
  CHECK(!j.at("d_hat_changepoint").is_null());

  Eigen::VectorXd small(2);
  small << 2.0, 1.0;
  const nlohmann::json j2 = curve_to_json(sure3_curve(small));
  CHECK(j2.at("d_hat_changepoint").is_null());
  CHECK(j2.at("estimator").is_null());
}
