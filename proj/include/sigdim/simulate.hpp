#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sigdim/estimators.hpp"
#include "sigdim/rng.hpp"
#include "sigdim/sure.hpp"

namespace sigdim {

enum class Mixing { Identity, RandomOrthogonal };

// Elliptical latent factor model x_i = V D z_i with D carrying d signal
// standard deviations above a common noise level, and z_i spherical:
// multivariate t with `nu` degrees of freedom, or Gaussian when nu is
// infinite.
struct ModelSpec {
  int p = 0;
  int d = 0;
  double nu = std::numeric_limits<double>::infinity();
  double noise_var = 1.0;
  std::vector<double> signal_vars;  // descending, each > noise_var, size d
  Mixing mixing = Mixing::Identity;
  std::uint64_t mixing_seed = 0;

  void validate() const;
  Eigen::MatrixXd mixing_matrix() const;
};

// Identical (spec, n, seed) produce bit-identical samples.
Sample sample_elliptical_t(const ModelSpec& spec, int n, std::uint64_t seed);

// Gaussian special case drawn in signal-plus-noise form, retaining the
// noiseless signal rows so the true reconstruction risk can be evaluated.
struct GaussianFactorSample {
  Sample sample;
  Eigen::MatrixXd signals;  // n x p rows of V_0 y_i
};
GaussianFactorSample sample_gaussian_factor(const ModelSpec& spec, int n, std::uint64_t seed);

struct MethodSpec {
  EstimatorKind estimator;
  CriterionKind criterion;
  SelectionRule rule;

  std::string label() const;
};

// One simulation cell: a model and a sample size. An empty signal_vars
// requests fresh Unif(1,3) signal variances for every replicate.
struct ScenarioCell {
  int p = 0;
  int d = 0;
  int n = 0;
  double nu = std::numeric_limits<double>::infinity();
  double noise_var = 0.5;
  std::vector<double> signal_vars;
  Mixing mixing = Mixing::Identity;
  std::uint64_t mixing_seed = 0;
};

struct ScenarioConfig {
  std::vector<ScenarioCell> cells;
  std::vector<MethodSpec> methods;
  int replicates = 1;
  std::uint64_t seed = 0;
  FixedPointConfig fixed_point = scatter_config();
};

struct MethodResult {
  MethodSpec method;
  std::vector<int> d_hat;             // -1 where the estimator failed
  std::vector<std::string> failures;  // "replicate 3: NonConvergence: ..."
  double proportion_correct = 0.0;
  double mean_runtime_seconds = 0.0;
};

struct CellResult {
  ScenarioCell cell;
  std::vector<MethodResult> methods;
};

struct RunResult {
  std::uint64_t seed = 0;
  int replicates = 0;
  std::vector<CellResult> cells;
};

// Runs every method on the same per-replicate sample; failures count as
// incorrect estimates (never excluded). Replicates may run on a worker
// pool; results are keyed by (cell, replicate) so the output is identical
// for any thread count.
RunResult run_scenario(const ScenarioConfig& config, int threads = 1);

// Timing-focused variant: always serial, data generation excluded from the
// timed region (monotonic clock).
RunResult time_methods(const ScenarioConfig& config);

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json result_to_json(const RunResult& result, bool include_timing);
std::string result_to_csv(const RunResult& result, bool include_timing);

// Locale-independent fixed-point formatting used by every CSV writer.
std::string format_double(double value, int decimals);

}  // namespace sigdim
