#include "jointkin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jointkin/error.hpp"
#include "jointkin/math.hpp"

namespace jointkin {

namespace {

void check_pair(const AngleSeriesPair& p) {
  if (p.estimated.size() != p.reference.size())
    throw Error(ErrorCode::ShapeError, "estimated and reference lengths differ");
  if (!p.t.empty() && p.t.size() != p.estimated.size())
    throw Error(ErrorCode::ShapeError, "time and angle lengths differ");
  if (p.estimated.empty()) throw Error(ErrorCode::ShapeError, "empty series");
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

double rmse(const AngleSeriesPair& p) {
  check_pair(p);
  double s = 0.0;
  for (std::size_t i = 0; i < p.estimated.size(); ++i) {
    const double e = p.estimated[i] - p.reference[i];
    s += e * e;
  }
  return deg(std::sqrt(s / p.estimated.size()));
}

double rmse_percent(const AngleSeriesPair& p) {
  check_pair(p);
  const auto [lo, hi] = std::minmax_element(p.reference.begin(), p.reference.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw Error(ErrorCode::ZeroRange, "reference has zero range");
  return 100.0 * rad(rmse(p)) / range;
}

double correlation(const AngleSeriesPair& p) {
  check_pair(p);
  const double mx = mean(p.estimated), my = mean(p.reference);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < p.estimated.size(); ++i) {
    const double dx = p.estimated[i] - mx, dy = p.reference[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

BlandAltman bland_altman(const std::vector<double>& a, const std::vector<double>& b, double k) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeError, "series lengths differ");
  if (a.empty()) throw Error(ErrorCode::ShapeError, "empty series");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = deg(b[i] - a[i]);
  BlandAltman out;
  out.mean_diff = mean(d);
  if (d.size() > 1) {
    double s = 0.0;
    for (double x : d) s += (x - out.mean_diff) * (x - out.mean_diff);
    out.sd_diff = std::sqrt(s / (d.size() - 1));
  }
  out.lower = out.mean_diff - k * out.sd_diff;
  out.upper = out.mean_diff + k * out.sd_diff;
  return out;
}

double weighted_window_metric(const WindowMetricTable& table, const std::array<double, 3>& a) {
  if (table.mu.size() != table.rmse.size()) throw Error(ErrorCode::IncompleteTable, "normalizer rows missing");
  if (!table.b.empty() && table.b.size() != table.rmse.size())
    throw Error(ErrorCode::IncompleteTable, "joint weight count mismatch");
  const double asum = a[0] + a[1] + a[2];
  if (!(asum > 0.0)) throw Error(ErrorCode::InvalidArgument, "axis weights must sum to a positive value");
  double f = 0.0;
  for (std::size_t j = 0; j < table.rmse.size(); ++j) {
    double row = 0.0;
    for (int i = 0; i < 3; ++i) {
      if (!table.rmse[j][i]) throw Error(ErrorCode::IncompleteTable, "missing cell at joint " + std::to_string(j));
      if (!(table.mu[j][i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "normalizers must be positive");
      row += a[i] / table.mu[j][i] * *table.rmse[j][i];
    }
    f += (table.b.empty() ? 1.0 : table.b[j]) * row / asum;
  }
  return f;
}

}  // namespace jointkin
