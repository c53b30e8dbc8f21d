#include "sigdim/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <thread>

namespace sigdim {

namespace {

using nlohmann::json;

Eigen::VectorXd scale_diagonal(const ModelSpec& spec) {
  Eigen::VectorXd diag(spec.p);
  for (int j = 0; j < spec.d; ++j) diag(j) = std::sqrt(spec.signal_vars[static_cast<std::size_t>(j)]);
  for (int j = spec.d; j < spec.p; ++j) diag(j) = std::sqrt(spec.noise_var);
  return diag;
}

Eigen::MatrixXd draw_elliptical_rows(const ModelSpec& spec, int n, Rng& rng) {
  const Eigen::VectorXd diag = scale_diagonal(spec);
  const bool gaussian = std::isinf(spec.nu);
  Eigen::MatrixXd rows(n, spec.p);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z = rng.normal_vector(spec.p);
    if (!gaussian) {
      double w;
      do {
        w = rng.chi_squared(spec.nu);
      } while (!(w > 1e-300));
      z *= std::sqrt(spec.nu / w);
    }
    rows.row(i) = (diag.array() * z.array()).matrix().transpose();
  }
  if (spec.mixing == Mixing::RandomOrthogonal) {
    rows *= spec.mixing_matrix().transpose();
  }
  return rows;
}

struct ReplicateRecord {
  std::vector<int> d_hat;
  std::vector<double> runtime;
  std::vector<std::string> failure;
};

ReplicateRecord run_replicate(const ScenarioCell& cell, const std::vector<MethodSpec>& methods,
                              const FixedPointConfig& fp, std::uint64_t seed,
                              std::size_t cell_index, std::size_t replicate_index) {
  Rng rng(substream_seed(seed, cell_index, replicate_index));

  ModelSpec spec;
  spec.p = cell.p;
  spec.d = cell.d;
  spec.nu = cell.nu;
  spec.noise_var = cell.noise_var;
  spec.mixing = cell.mixing;
  spec.mixing_seed = cell.mixing_seed;
  if (cell.signal_vars.empty() && cell.d > 0) {
    spec.signal_vars.resize(static_cast<std::size_t>(cell.d));
    for (auto& v : spec.signal_vars) v = rng.uniform(1.0, 3.0);
    std::sort(spec.signal_vars.begin(), spec.signal_vars.end(), std::greater<double>());
  } else {
    spec.signal_vars = cell.signal_vars;
  }
  spec.validate();

  const Sample sample{draw_elliptical_rows(spec, cell.n, rng)};

  ReplicateRecord record;
  record.d_hat.resize(methods.size(), -1);
  record.runtime.resize(methods.size(), 0.0);
  record.failure.resize(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto start = std::chrono::steady_clock::now();
    try {
      record.d_hat[m] =
          estimate_dimension(sample, methods[m].estimator, methods[m].criterion,
                             methods[m].rule, fp)
              .d_hat;
    } catch (const Error& e) {
      record.d_hat[m] = -1;
      record.failure[m] = e.what();
    }
    const auto stop = std::chrono::steady_clock::now();
    record.runtime[m] = std::chrono::duration<double>(stop - start).count();
  }
  return record;
}

std::string nu_to_string(double nu) {
  if (std::isinf(nu)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", nu);
  return buf;
}

const json& require_field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("missing field " + path + "." + key);
  }
  return j.at(key);
}

int require_int(const json& j, const char* key, const std::string& path) {
  const json& v = require_field(j, key, path);
  if (!v.is_number_integer()) {
    throw ConfigError("field " + path + "." + key + " must be an integer");
  }
  return v.get<int>();
}

double require_number(const json& j, const char* key, const std::string& path) {
  const json& v = require_field(j, key, path);
  if (!v.is_number()) {
    throw ConfigError("field " + path + "." + key + " must be a number");
  }
  return v.get<double>();
}

double parse_nu(const json& cell, const std::string& path) {
  if (!cell.contains("nu")) return std::numeric_limits<double>::infinity();
  const json& v = cell.at("nu");
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "gaussian") {
      return std::numeric_limits<double>::infinity();
    }
    throw ConfigError("field " + path + ".nu must be a positive number or \"inf\"");
  }
  if (!v.is_number()) {
    throw ConfigError("field " + path + ".nu must be a positive number or \"inf\"");
  }
  const double nu = v.get<double>();
  if (!(nu > 0.0)) {
    throw ConfigError("field " + path + ".nu must be positive");
  }
  return nu;
}

}  // namespace

void ModelSpec::validate() const {
  if (p < 2) throw ConfigError("model requires p >= 2, got p = " + std::to_string(p));
  if (d < 0 || d >= p) {
    throw ConfigError("model requires 0 <= d < p, got d = " + std::to_string(d) +
                      ", p = " + std::to_string(p));
  }
  if (!(nu > 0.0)) throw ConfigError("degrees of freedom must be positive");
  if (!(noise_var > 0.0)) throw ConfigError("noise variance must be positive");
  if (signal_vars.size() != static_cast<std::size_t>(d)) {
    throw ConfigError("expected " + std::to_string(d) + " signal variances, got " +
                      std::to_string(signal_vars.size()));
  }
  for (std::size_t j = 0; j < signal_vars.size(); ++j) {
    if (!(signal_vars[j] > noise_var)) {
      throw ConfigError("signal variances must exceed the noise variance");
    }
    if (j > 0 && signal_vars[j] > signal_vars[j - 1]) {
      throw ConfigError("signal variances must be sorted descending");
    }
  }
}

Eigen::MatrixXd ModelSpec::mixing_matrix() const {
  if (mixing == Mixing::Identity) return Eigen::MatrixXd::Identity(p, p);
  Rng rng(substream_seed(mixing_seed, 0x6d6978ULL, 0));
  return random_orthogonal(p, rng);
}

Sample sample_elliptical_t(const ModelSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n < 2) throw ConfigError("sample size must be at least 2");
  Rng rng(seed);
  return Sample{draw_elliptical_rows(spec, n, rng)};
}

GaussianFactorSample sample_gaussian_factor(const ModelSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (!std::isinf(spec.nu)) {
    throw ConfigError("signal-plus-noise sampling is defined for the Gaussian case only");
  }
  if (n < 2) throw ConfigError("sample size must be at least 2");

  Rng rng(seed);
  const Eigen::MatrixXd v = spec.mixing_matrix();
  const auto v0 = v.leftCols(spec.d);
  const double noise_sd = std::sqrt(spec.noise_var);

  Eigen::MatrixXd signals = Eigen::MatrixXd::Zero(n, spec.p);
  Eigen::MatrixXd rows(n, spec.p);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd y(spec.d);
    for (int j = 0; j < spec.d; ++j) {
      y(j) = std::sqrt(spec.signal_vars[static_cast<std::size_t>(j)] - spec.noise_var) *
             rng.normal();
    }
    const Eigen::VectorXd signal = v0 * y;
    signals.row(i) = signal.transpose();
    rows.row(i) = (signal + noise_sd * rng.normal_vector(spec.p)).transpose();
  }
  return GaussianFactorSample{Sample{std::move(rows)}, std::move(signals)};
}

std::string MethodSpec::label() const {
  return to_string(criterion) + "(" + to_string(estimator) + "," + to_string(rule) + ")";
}

RunResult run_scenario(const ScenarioConfig& config, int threads) {
  if (config.cells.empty()) throw ConfigError("scenario has no cells");
  if (config.replicates < 1) throw ConfigError("scenario requires replicates >= 1");

  const std::size_t cells = config.cells.size();
  const auto reps = static_cast<std::size_t>(config.replicates);
  std::vector<ReplicateRecord> records(cells * reps);

  const auto worker_body = [&](std::size_t task) {
    const std::size_t c = task / reps;
    const std::size_t r = task % reps;
    records[task] =
        run_replicate(config.cells[c], config.methods, config.fixed_point, config.seed, c, r);
  };

  const std::size_t tasks = cells * reps;
  const int pool = std::max(1, threads);
  if (pool == 1) {
    for (std::size_t t = 0; t < tasks; ++t) worker_body(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(pool));
    for (int w = 0; w < pool; ++w) {
      workers.emplace_back([&] {
        for (;;) {
          const std::size_t t = next.fetch_add(1);
          if (t >= tasks) return;
          worker_body(t);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  RunResult result;
  result.seed = config.seed;
  result.replicates = config.replicates;
  result.cells.reserve(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    CellResult cell_result;
    cell_result.cell = config.cells[c];
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      MethodResult mr;
      mr.method = config.methods[m];
      mr.d_hat.reserve(reps);
      double time_sum = 0.0;
      int correct = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const ReplicateRecord& rec = records[c * reps + r];
        mr.d_hat.push_back(rec.d_hat[m]);
        time_sum += rec.runtime[m];
        if (rec.d_hat[m] == config.cells[c].d) ++correct;
        if (!rec.failure[m].empty()) {
          mr.failures.push_back("replicate " + std::to_string(r) + ": " + rec.failure[m]);
        }
      }
      mr.proportion_correct = static_cast<double>(correct) / static_cast<double>(reps);
      mr.mean_runtime_seconds = time_sum / static_cast<double>(reps);
      cell_result.methods.push_back(std::move(mr));
    }
    result.cells.push_back(std::move(cell_result));
  }
  return result;
}

RunResult time_methods(const ScenarioConfig& config) {
  return run_scenario(config, 1);
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig config;
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");

  const json& seed = require_field(j, "seed", "$");
  if (!seed.is_number_integer() && !seed.is_number_unsigned()) {
    throw ConfigError("field $.seed must be an integer");
  }
  config.seed = seed.get<std::uint64_t>();
  config.replicates = require_int(j, "replicates", "$");
  if (config.replicates < 1) throw ConfigError("field $.replicates must be >= 1");

  if (j.contains("fixed_point")) {
    const json& fp = j.at("fixed_point");
    if (fp.contains("tol")) config.fixed_point.tol = require_number(fp, "tol", "$.fixed_point");
    if (fp.contains("max_iter")) {
      config.fixed_point.max_iter = require_int(fp, "max_iter", "$.fixed_point");
    }
    if (!(config.fixed_point.tol > 0.0) || config.fixed_point.max_iter < 1) {
      throw ConfigError("field $.fixed_point requires tol > 0 and max_iter >= 1");
    }
  }

  const json& cells = require_field(j, "cells", "$");
  if (!cells.is_array() || cells.empty()) {
    throw ConfigError("field $.cells must be a non-empty array");
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const std::string path = "$.cells[" + std::to_string(c) + "]";
    const json& jc = cells.at(c);
    ScenarioCell cell;
    cell.p = require_int(jc, "p", path);
    cell.d = require_int(jc, "d", path);
    cell.n = require_int(jc, "n", path);
    cell.nu = parse_nu(jc, path);
    cell.noise_var = jc.contains("noise_var") ? require_number(jc, "noise_var", path) : 0.5;
    if (jc.contains("signal_vars")) {
      const json& sv = jc.at("signal_vars");
      if (!sv.is_array()) throw ConfigError("field " + path + ".signal_vars must be an array");
      for (const auto& x : sv) {
        if (!x.is_number()) {
          throw ConfigError("field " + path + ".signal_vars must contain numbers");
        }
        cell.signal_vars.push_back(x.get<double>());
      }
    }
    if (jc.contains("mixing")) {
      const auto mix = jc.at("mixing").get<std::string>();
      if (mix == "identity") {
        cell.mixing = Mixing::Identity;
      } else if (mix == "random_orthogonal") {
        cell.mixing = Mixing::RandomOrthogonal;
      } else {
        throw ConfigError("field " + path + ".mixing must be identity|random_orthogonal");
      }
    }
    if (jc.contains("mixing_seed")) {
      cell.mixing_seed = jc.at("mixing_seed").get<std::uint64_t>();
    }
    if (cell.n < 2) throw ConfigError("field " + path + ".n must be >= 2");
    config.cells.push_back(std::move(cell));
  }

  const json& methods = require_field(j, "methods", "$");
  if (!methods.is_array()) throw ConfigError("field $.methods must be an array");
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const std::string path = "$.methods[" + std::to_string(m) + "]";
    const json& jm = methods.at(m);
    MethodSpec spec{
        estimator_from_string(require_field(jm, "estimator", path).get<std::string>()),
        criterion_from_string(require_field(jm, "criterion", path).get<std::string>()),
        rule_from_string(require_field(jm, "rule", path).get<std::string>())};
    config.methods.push_back(spec);
  }
  return config;
}

nlohmann::json result_to_json(const RunResult& result, bool include_timing) {
  json out;
  out["seed"] = result.seed;
  out["replicates"] = result.replicates;
  json cells = json::array();
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const CellResult& cr = result.cells[c];
    json jc;
    jc["cell_index"] = c;
    jc["p"] = cr.cell.p;
    jc["d"] = cr.cell.d;
    jc["n"] = cr.cell.n;
    jc["nu"] = std::isinf(cr.cell.nu) ? json("inf") : json(cr.cell.nu);
    jc["noise_var"] = cr.cell.noise_var;
    jc["signal_vars"] = cr.cell.signal_vars.empty() ? json("unif13") : json(cr.cell.signal_vars);
    json jms = json::array();
    for (const MethodResult& mr : cr.methods) {
      json jm;
      jm["estimator"] = to_string(mr.method.estimator);
      jm["criterion"] = to_string(mr.method.criterion);
      jm["rule"] = to_string(mr.method.rule);
      jm["proportion_correct"] = mr.proportion_correct;
      jm["d_hat"] = mr.d_hat;
      jm["failures"] = mr.failures;
      if (include_timing) jm["mean_runtime_seconds"] = mr.mean_runtime_seconds;
      jms.push_back(std::move(jm));
    }
    jc["methods"] = std::move(jms);
    cells.push_back(std::move(jc));
  }
  out["cells"] = std::move(cells);
  return out;
}

std::string format_double(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::string result_to_csv(const RunResult& result, bool include_timing) {
  std::ostringstream out;
  out << "cell_index,p,d,n,nu,noise_var,estimator,criterion,rule,proportion_correct";
  if (include_timing) out << ",mean_runtime_seconds";
  out << "\n";
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const CellResult& cr = result.cells[c];
    for (const MethodResult& mr : cr.methods) {
      out << c << ',' << cr.cell.p << ',' << cr.cell.d << ',' << cr.cell.n << ','
          << nu_to_string(cr.cell.nu) << ',' << format_double(cr.cell.noise_var, 6) << ','
          << to_string(mr.method.estimator) << ',' << to_string(mr.method.criterion) << ','
          << to_string(mr.method.rule) << ',' << format_double(mr.proportion_correct, 6);
      if (include_timing) out << ',' << format_double(mr.mean_runtime_seconds, 6);
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace sigdim
