#include "sigdim/rolling.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sigdim/simulate.hpp"

namespace sigdim {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& raw, int line_no, std::size_t column,
                  const std::string& label) {
  const std::string text = trim(raw);
  if (text.empty()) {
    throw MissingValue("blank cell at line " + std::to_string(line_no) + ", column '" +
                       label + "' (index " + std::to_string(column) + ")");
  }
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || !std::isfinite(value)) {
    throw ParseError("cannot parse '" + text + "' as a number at line " +
                     std::to_string(line_no) + ", column '" + label + "'");
  }
  return value;
}

}  // namespace

void WindowConfig::validate() const {
  if (length < 4 || length % 2 != 0) {
    throw ConfigError("window length must be an even integer >= 4, got " +
                      std::to_string(length));
  }
}

ReturnSeries load_returns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("file '" + path + "' is empty");
  }
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3) {
    throw ParseError("header must list a date column and at least two assets, got " +
                     std::to_string(header.size()) + " columns");
  }

  ReturnSeries series;
  series.labels.assign(header.begin() + 1, header.end());
  for (auto& label : series.labels) label = trim(label);
  const std::size_t p = series.labels.size();

  std::vector<std::string> dates;
  std::vector<double> flat;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != p + 1) {
      throw ParseError("line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(p + 1));
    }
    const std::string date = trim(fields[0]);
    if (date.empty()) {
      throw MissingValue("blank date at line " + std::to_string(line_no));
    }
    if (!dates.empty() && date <= dates.back()) {
      throw NonMonotoneDates("date '" + date + "' at line " + std::to_string(line_no) +
                             " does not increase past '" + dates.back() + "'");
    }
    dates.push_back(date);
    for (std::size_t j = 0; j < p; ++j) {
      flat.push_back(parse_cell(fields[j + 1], line_no, j, series.labels[j]));
    }
  }

  const std::size_t t = dates.size();
  if (t < 2) {
    throw ParseError("series needs at least two data rows, got " + std::to_string(t));
  }
  series.dates = std::move(dates);
  series.values.resize(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      series.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          flat[i * p + j];
    }
  }
  return series;
}

std::vector<int> rolling_dimensions(const ReturnSeries& series, const WindowConfig& cfg,
                                    const FixedPointConfig& fp) {
  cfg.validate();
  if (cfg.length > series.T()) {
    throw ConfigError("window length " + std::to_string(cfg.length) +
                      " exceeds the series length " + std::to_string(series.T()));
  }

  const int windows = series.T() - cfg.length + 1;
  std::vector<int> estimates(static_cast<std::size_t>(windows), -1);
  for (int s = 0; s < windows; ++s) {
    try {
      const Sample window{series.values.middleRows(s, cfg.length)};
      estimates[static_cast<std::size_t>(s)] =
          estimate_dimension(window, cfg.estimator, cfg.criterion, cfg.rule, fp).d_hat;
    } catch (const Error&) {
      // left as the -1 sentinel; the smoothing step substitutes a neighbour
    }
  }
  return estimates;
}

SmoothedCurve smooth_backtransform(const std::vector<int>& raw, int window_length, int T) {
  if (window_length < 4 || window_length % 2 != 0) {
    throw ConfigError("window length must be an even integer >= 4");
  }
  const int windows = T - window_length + 1;
  if (windows < 1 || raw.size() != static_cast<std::size_t>(windows)) {
    throw LengthMismatch("expected " + std::to_string(windows) + " window estimates for T = " +
                         std::to_string(T) + ", got " + std::to_string(raw.size()));
  }

  // Substitute failed windows with the nearest successful estimate.
  std::vector<int> filled = raw;
  for (int w = 0; w < windows; ++w) {
    if (filled[static_cast<std::size_t>(w)] >= 0) continue;
    int best = -1;
    for (int offset = 1; offset < windows; ++offset) {
      const int left = w - offset;
      const int right = w + offset;
      if (left >= 0 && raw[static_cast<std::size_t>(left)] >= 0) {
        best = raw[static_cast<std::size_t>(left)];
        break;
      }
      if (right < windows && raw[static_cast<std::size_t>(right)] >= 0) {
        best = raw[static_cast<std::size_t>(right)];
        break;
      }
    }
    if (best < 0) {
      throw NonConvergence("every window failed; nothing to smooth");
    }
    filled[static_cast<std::size_t>(w)] = best;
  }

  const double half = static_cast<double>(window_length) / 2.0;
  SmoothedCurve curve;
  curve.raw = raw;
  curve.smoothed.assign(static_cast<std::size_t>(T), 0.0);
  curve.n_covering_windows.assign(static_cast<std::size_t>(T), 0);
  for (int date = 0; date < T; ++date) {
    double weight_sum = 0.0;
    double value_sum = 0.0;
    int covering = 0;
    const int first_window = std::max(0, date - window_length + 1);
    const int last_window = std::min(windows - 1, date);
    for (int w = first_window; w <= last_window; ++w) {
      const int pos = date - w + 1;  // 1-based position of this date in window w
      const double weight =
          static_cast<double>(std::min(pos, window_length + 1 - pos)) / half;
      weight_sum += weight;
      value_sum += weight * filled[static_cast<std::size_t>(w)];
      ++covering;
    }
    curve.smoothed[static_cast<std::size_t>(date)] = value_sum / weight_sum;
    curve.n_covering_windows[static_cast<std::size_t>(date)] = covering;
  }
  return curve;
}

void rolling_report(const ReturnSeries& series, const WindowConfig& cfg,
                    const FixedPointConfig& fp, const std::string& out_prefix) {
  const std::vector<int> raw = rolling_dimensions(series, cfg, fp);
  const SmoothedCurve curve = smooth_backtransform(raw, cfg.length, series.T());

  std::vector<int> failed_windows;
  for (std::size_t w = 0; w < raw.size(); ++w) {
    if (raw[w] < 0) failed_windows.push_back(static_cast<int>(w));
  }

  const std::string csv_path = out_prefix + ".csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
  csv << "date,smoothed_dimension,n_covering_windows\n";
  for (int date = 0; date < series.T(); ++date) {
    csv << series.dates[static_cast<std::size_t>(date)] << ','
        << format_double(curve.smoothed[static_cast<std::size_t>(date)], 6) << ','
        << curve.n_covering_windows[static_cast<std::size_t>(date)] << "\n";
  }
  csv.close();
  if (!csv) throw IoError("failed writing '" + csv_path + "'");

  nlohmann::json j;
  j["window_length"] = cfg.length;
  j["estimator"] = to_string(cfg.estimator);
  j["criterion"] = to_string(cfg.criterion);
  j["rule"] = to_string(cfg.rule);
  j["n_windows"] = static_cast<int>(raw.size());
  j["raw_estimates"] = raw;
  j["failed_windows"] = failed_windows;
  j["dates"] = series.dates;
  j["labels"] = series.labels;
  j["smoothed"] = curve.smoothed;
  j["n_covering_windows"] = curve.n_covering_windows;

  const std::string json_path = out_prefix + ".json";
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot open '" + json_path + "' for writing");
  js << j.dump(2) << "\n";
  js.close();
  if (!js) throw IoError("failed writing '" + json_path + "'");
}

}  // namespace sigdim
