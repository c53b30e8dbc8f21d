#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigdim/errors.hpp"
#include "sigdim/rolling.hpp"
#include "sigdim/simulate.hpp"
#include "sigdim/sure.hpp"

namespace {

using sigdim::Error;

// Plain observation matrix: header row, then n rows of p numbers.
sigdim::Sample load_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sigdim::IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw sigdim::ParseError("file '" + path + "' is empty");
  std::size_t p = 1;
  for (char c : line) {
    if (c == ',') ++p;
  }

  std::vector<double> flat;
  std::size_t rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string field;
    std::size_t count = 0;
    while (std::getline(fields, field, ',')) {
      char* end = nullptr;
      const double value = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) {
        throw sigdim::ParseError("cannot parse '" + field + "' at line " +
                                 std::to_string(line_no));
      }
      flat.push_back(value);
      ++count;
    }
    if (count != p) {
      throw sigdim::ParseError("line " + std::to_string(line_no) + " has " +
                               std::to_string(count) + " fields, expected " + std::to_string(p));
    }
    ++rows;
  }
  if (rows < 2) throw sigdim::ParseError("need at least two data rows in '" + path + "'");

  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * p + j];
    }
  }
  return sigdim::Sample{std::move(m)};
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sigdim::IoError("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw sigdim::ParseError("invalid JSON in '" + path + "': " + e.what());
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw sigdim::IoError("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw sigdim::IoError("failed writing '" + path + "'");
}

int default_threads() {
  if (const char* env = std::getenv("SIGDIM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

struct EstimateArgs {
  std::string input;
  std::string estimator = "tyler";
  std::string criterion = "sure2";
  std::string rule = "argmin";
  std::string out;
};

int run_estimate(const EstimateArgs& args) {
  const auto estimator = sigdim::estimator_from_string(args.estimator);
  const auto criterion = sigdim::criterion_from_string(args.criterion);
  const auto rule = sigdim::rule_from_string(args.rule);

  const sigdim::Sample sample = load_observations_csv(args.input);
  const sigdim::DimensionEstimate estimate = sigdim::estimate_dimension(
      sample, estimator, criterion, rule, sigdim::scatter_config());

  if (!args.out.empty()) {
    write_text(args.out, sigdim::curve_to_json(estimate.curve).dump(2) + "\n");
  }
  std::cout << estimate.d_hat << "\n";
  return 0;
}

struct SimulateArgs {
  std::string config;
  std::string out_csv;
  std::string out_json;
  int threads = 0;
};

int run_simulate(const SimulateArgs& args) {
  const sigdim::ScenarioConfig config = sigdim::scenario_from_json(load_json(args.config));
  const int threads = args.threads >= 1 ? args.threads : default_threads();
  const sigdim::RunResult result = sigdim::run_scenario(config, threads);
  if (!args.out_csv.empty()) {
    write_text(args.out_csv, sigdim::result_to_csv(result, /*include_timing=*/false));
  }
  if (!args.out_json.empty()) {
    write_text(args.out_json,
               sigdim::result_to_json(result, /*include_timing=*/false).dump(2) + "\n");
  }
  return 0;
}

struct RollingArgs {
  std::string input;
  int window = 48;
  std::string estimator = "tyler";
  std::string criterion = "sure2";
  std::string rule = "argmin";
  std::string out_prefix;
};

int run_rolling(const RollingArgs& args) {
  sigdim::WindowConfig cfg;
  cfg.length = args.window;
  cfg.estimator = sigdim::estimator_from_string(args.estimator);
  cfg.criterion = sigdim::criterion_from_string(args.criterion);
  cfg.rule = sigdim::rule_from_string(args.rule);

  const sigdim::ReturnSeries series = sigdim::load_returns_csv(args.input);
  sigdim::rolling_report(series, cfg, sigdim::scatter_config(), args.out_prefix);
  return 0;
}

struct BenchArgs {
  std::string config;
  std::string out;
};

int run_bench(const BenchArgs& args) {
  const sigdim::ScenarioConfig config = sigdim::scenario_from_json(load_json(args.config));
  const sigdim::RunResult result = sigdim::time_methods(config);
  write_text(args.out, sigdim::result_to_csv(result, /*include_timing=*/true));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent signal dimension estimation for heavy-tailed multivariate data"};
  app.require_subcommand(1);

  EstimateArgs estimate_args;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Estimate the signal dimension of one data set");
  estimate->add_option("--input", estimate_args.input, "CSV of observations (header + rows)")
      ->required();
  estimate->add_option("--estimator", estimate_args.estimator, "cov|sscm|tyler|hr");
  estimate->add_option("--criterion", estimate_args.criterion, "sure1|sure2|sure3");
  estimate->add_option("--rule", estimate_args.rule, "argmin|cp");
  estimate->add_option("--out", estimate_args.out, "write the criterion curve as JSON");

  SimulateArgs simulate_args;
  CLI::App* simulate = app.add_subcommand("simulate", "Run a simulation scenario grid");
  simulate->add_option("--config", simulate_args.config, "scenario JSON")->required();
  simulate->add_option("--out-csv", simulate_args.out_csv, "summary CSV path");
  simulate->add_option("--out-json", simulate_args.out_json, "per-replicate JSON path");
  simulate->add_option("--threads", simulate_args.threads,
                       "worker threads (default: SIGDIM_THREADS or 1)");

  RollingArgs rolling_args;
  CLI::App* rolling = app.add_subcommand(
      "rolling", "Windowed dimension estimates over a return series");
  rolling->add_option("--input", rolling_args.input, "return series CSV")->required();
  rolling->add_option("--window", rolling_args.window, "even window length >= 4");
  rolling->add_option("--estimator", rolling_args.estimator, "cov|sscm|tyler|hr");
  rolling->add_option("--criterion", rolling_args.criterion, "sure1|sure2|sure3");
  rolling->add_option("--rule", rolling_args.rule, "argmin|cp");
  rolling->add_option("--out-prefix", rolling_args.out_prefix, "output path prefix")->required();

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Time the methods of a scenario (serial)");
  bench->add_option("--config", bench_args.config, "scenario JSON")->required();
  bench->add_option("--out", bench_args.out, "timing CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (*estimate) return run_estimate(estimate_args);
    if (*simulate) {
      if (simulate_args.threads < 0) {
        std::cerr << "--threads must be >= 1\n";
        return 2;
      }
      return run_simulate(simulate_args);
    }
    if (*rolling) {
      if (rolling_args.window < 4 || rolling_args.window % 2 != 0) {
        std::cerr << "--window must be an even integer >= 4, got " << rolling_args.window
                  << "\n";
        return 2;
      }
      return run_rolling(rolling_args);
    }
    if (*bench) return run_bench(bench_args);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
