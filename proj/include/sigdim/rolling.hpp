#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sigdim/estimators.hpp"
#include "sigdim/sure.hpp"

namespace sigdim {

// Multivariate return series: T dated observations of p assets, dates
// strictly increasing, no missing values.
struct ReturnSeries {
  std::vector<std::string> dates;
  std::vector<std::string> labels;
  Eigen::MatrixXd values;  // T x p

  int T() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }
};

// Window length must be even (the weight scheme is anchored on the middle
// two positions) and at least 4.
struct WindowConfig {
  int length = 48;
  EstimatorKind estimator = EstimatorKind::Tyler;
  CriterionKind criterion = CriterionKind::Sure2;
  SelectionRule rule = SelectionRule::Argmin;

  void validate() const;
};

struct SmoothedCurve {
  std::vector<double> smoothed;         // per date, length T
  std::vector<int> raw;                 // per window, length T - length + 1
  std::vector<int> n_covering_windows;  // per date
};

// Expects a header row "date,<label>,..." followed by rows of an
// ISO-like date string and p decimal values.
ReturnSeries load_returns_csv(const std::string& path);

// Dimension estimate for every window of cfg.length consecutive rows;
// windows where the estimator fails yield -1.
std::vector<int> rolling_dimensions(const ReturnSeries& series, const WindowConfig& cfg,
                                    const FixedPointConfig& fp);

// Per-date weighted average of the estimates of all covering windows.
// Within a window of length l, position pos in 1..l carries weight
// min(pos, l+1-pos) / (l/2): 1 at the two middle positions, decreasing
// linearly to 2/l at the endpoints. Failed windows take the nearest
// successful window's estimate (ties toward the earlier window).
SmoothedCurve smooth_backtransform(const std::vector<int>& raw, int window_length, int T);

// Writes <prefix>.csv (date, smoothed_dimension to 6 decimals,
// n_covering_windows) and <prefix>.json (raw estimates, config echo,
// diagnostics).
void rolling_report(const ReturnSeries& series, const WindowConfig& cfg,
                    const FixedPointConfig& fp, const std::string& out_prefix);

}  // namespace sigdim
