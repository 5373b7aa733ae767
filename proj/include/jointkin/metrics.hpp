#pragma once

#include <array>
#include <optional>
#include <vector>

namespace jointkin {

// Estimated and reference angles in radians. Results below are in degrees
// unless stated otherwise.
struct AngleSeriesPair {
  std::vector<double> t;
  std::vector<double> estimated;
  std::vector<double> reference;
};

double rmse(const AngleSeriesPair& p);
// 100 * rmse / (max - min of the reference)
double rmse_percent(const AngleSeriesPair& p);
// Pearson coefficient, unitless
double correlation(const AngleSeriesPair& p);

struct BlandAltman {
  double mean_diff = 0.0;  // deg
  double sd_diff = 0.0;    // sample SD, deg
  double lower = 0.0, upper = 0.0;
};
// Differences are b - a. Limits at mean +- k * SD.
BlandAltman bland_altman(const std::vector<double>& a, const std::vector<double>& b, double k = 1.0);

// One row per joint. Every rmse cell must be present.
struct WindowMetricTable {
  std::vector<std::array<std::optional<double>, 3>> rmse;
  std::vector<std::array<double, 3>> mu;  // per-cell correlation coefficients
  std::vector<double> b;                  // per-joint weights, defaults to 1
};
double weighted_window_metric(const WindowMetricTable& table, const std::array<double, 3>& a = {2.0, 1.0, 1.0});

}  // namespace jointkin
