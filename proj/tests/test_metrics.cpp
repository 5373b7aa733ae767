#include "doctest.h"

#include <functional>
#include <random>

#include "jointkin/error.hpp"
#include "jointkin/math.hpp"
#include "jointkin/metrics.hpp"

using namespace jointkin;

namespace {

// series given in degrees, stored in radians as the metrics expect
AngleSeriesPair pair_deg(const std::vector<double>& est, const std::vector<double>& ref) {
  AngleSeriesPair p;
  for (double v : est) p.estimated.push_back(rad(v));
  for (double v : ref) p.reference.push_back(rad(v));
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("rmse") {
  CHECK(rmse(pair_deg({1, 2, 3}, {1, 2, 3})) == 0.0);
  CHECK(rmse(pair_deg({3, 4, 5}, {1, 2, 3})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rmse(pair_deg({0, 3, 4}, {0, 0, 0})) == doctest::Approx(std::sqrt(25.0 / 3.0)).epsilon(1e-12));
  CHECK(code_of([] { rmse(pair_deg({1, 2}, {1})); }) == ErrorCode::ShapeError);
  CHECK(code_of([] { rmse(pair_deg({}, {})); }) == ErrorCode::ShapeError);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 20.0);
  for (double c : {-7.5, 0.25, 13.0}) {
    std::vector<double> x;
    for (int i = 0; i < 50; ++i) x.push_back(n(rng));
    std::vector<double> y = x;
    for (double& v : y) v += c;
    CHECK(rmse(pair_deg(y, x)) == doctest::Approx(std::abs(c)).epsilon(1e-9));
  }
}

TEST_CASE("rmse percent") {
  CHECK(rmse_percent(pair_deg({0, 50, 100}, {0, 50, 100})) == 0.0);
  CHECK(rmse_percent(pair_deg({1, 51, 101}, {0, 50, 100})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(code_of([] { rmse_percent(pair_deg({1, 2}, {3, 3})); }) == ErrorCode::ZeroRange);
}

TEST_CASE("correlation") {
  CHECK(correlation(pair_deg({1, 5, 2, 8}, {1, 5, 2, 8})) == doctest::Approx(1.0));
  CHECK(correlation(pair_deg({-1, -5, -2, -8}, {1, 5, 2, 8})) == doctest::Approx(-1.0));
  CHECK(correlation(pair_deg({1, 2, 3}, {2, 4, 6.1})) > 0.999);
  CHECK(code_of([] { correlation(pair_deg({1, 1, 1}, {1, 2, 3})); }) == ErrorCode::ZeroVariance);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> a, b;
  for (int i = 0; i < 200; ++i) {
    a.push_back(n(rng));
    b.push_back(0.5 * a.back() + n(rng));
  }
  const double r = correlation(pair_deg(a, b));
  std::vector<double> a2 = a, b2 = b;
  for (double& v : a2) v = 3.0 * v - 40.0;
  for (double& v : b2) v = 0.2 * v + 7.0;
  CHECK(correlation(pair_deg(a2, b)) == doctest::Approx(r).epsilon(1e-12));
  CHECK(correlation(pair_deg(a, b2)) == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("Bland-Altman") {
  const std::vector<double> a = {rad(3), rad(-2), rad(10)};
  BlandAltman s = bland_altman(a, a);
  CHECK(s.mean_diff == 0.0);
  CHECK(s.sd_diff == 0.0);
  CHECK(s.lower == 0.0);
  CHECK(s.upper == 0.0);

  std::vector<double> b = a;
  for (double& v : b) v += rad(1.0);
  s = bland_altman(a, b);
  CHECK(s.mean_diff == doctest::Approx(1.0));
  CHECK(s.sd_diff == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.lower == doctest::Approx(1.0));
  CHECK(s.upper == doctest::Approx(1.0));

  s = bland_altman({0, 0, 0}, {rad(-1), 0, rad(1)});
  CHECK(s.mean_diff == doctest::Approx(0.0));
  CHECK(s.sd_diff == doctest::Approx(1.0));
  CHECK(s.lower == doctest::Approx(-1.0));
  CHECK(s.upper == doctest::Approx(1.0));

  // coverage of mean +- 1 SD on Gaussian differences
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.3, 0.05);
  std::vector<double> x(10000, 0.0), y;
  for (int i = 0; i < 10000; ++i) y.push_back(n(rng));
  s = bland_altman(x, y);
  int inside = 0;
  for (double v : y) inside += deg(v) >= s.lower && deg(v) <= s.upper;
  CHECK(inside / 1e4 >= 0.6827 - 0.02);

  CHECK_THROWS_AS(bland_altman({1, 2}, {1}), Error);
}

TEST_CASE("weighted window metric") {
  WindowMetricTable t;
  t.rmse = {{0.0, 0.0, 0.0}};
  t.mu = {{0.9, 0.8, 0.7}};
  CHECK(weighted_window_metric(t) == 0.0);

  t.rmse = {{1.0, 1.0, 1.0}};
  t.mu = {{1.0, 1.0, 1.0}};
  CHECK(weighted_window_metric(t) == doctest::Approx(1.0));

  t.rmse = {{1.0, 2.0, 3.0}, {0.5, 0.5, 0.5}};
  t.mu = {{0.9, 0.8, 0.7}, {1.0, 1.0, 1.0}};
  const double base = weighted_window_metric(t);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 3; ++i) {
      WindowMetricTable u = t;
      u.rmse[j][i] = *u.rmse[j][i] + 0.1;
      CHECK(weighted_window_metric(u) > base);
    }

  t.rmse[1][2].reset();
  CHECK(code_of([&] { weighted_window_metric(t); }) == ErrorCode::IncompleteTable);
}

}  // TEST_SUITE
