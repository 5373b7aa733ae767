#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "jointkin/error.hpp"
#include "jointkin/io.hpp"
#include "support.hpp"

using namespace jointkin;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "jointkin_test_io";
  fs::create_directories(d);
  return d / name;
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

ImuSample sample(double t, const Vec3& g, const Vec3& a = Vec3(0, 0, kGravity), const Vec3& m = Vec3(1, 0, 0)) {
  ImuSample s;
  s.t = t;
  s.gyro = g;
  s.accel = a;
  s.mag = m;
  return s;
}

ImuStream still(std::size_t n, const Vec3& gyro_bias = Vec3::Zero()) {
  ImuStream s;
  for (std::size_t k = 0; k < n; ++k) s.push_back(sample(0.01 * k, gyro_bias));
  return s;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_SUITE("io") {

TEST_CASE("three-row file") {
  const std::string text =
      "t,gx,gy,gz,ax,ay,az,mx,my,mz\n"
      "0.00,0,0,0,0,0,9.8,1,0,0\n"
      "0.01,0.1,0,0,0,0,9.8,1,0,0\n"
      "0.02,0.2,0,0,0,0,9.8,1,0,0\n";
  const fs::path p = scratch("three.csv");
  std::ofstream(p) << text;
  const ImuStream s = load_stream(p.string(), 100.0);
  REQUIRE(s.size() == 3);
  CHECK(s[2].gyro.x() == 0.2);
}

TEST_CASE("column map and schema errors") {
  const std::string text =
      "time,wx,wy,wz,ax,ay,az,mx,my,mz\n"
      "0.00,0,0,0,0,0,9.8,1,0,0\n"
      "0.01,0.1,0,0,0,0,9.8,1,0,0\n";
  const ColumnMap cols = {{"t", "time"}, {"gx", "wx"}, {"gy", "wy"}, {"gz", "wz"}};
  CHECK(parse_stream(text, 100.0, cols).size() == 2);
  CHECK(code_of([&] { parse_stream(text, 100.0); }) == ErrorCode::SchemaError);
  CHECK(code_of([] { parse_stream("t,gx,gy,gz,ax,ay,az,mx,my,mz\n0,1,2,x,0,0,0,0,0,0\n", 100.0); }) ==
        ErrorCode::SchemaError);
  CHECK(code_of([] { load_stream("/nonexistent/stream.csv", 100.0); }) == ErrorCode::IoError);
}

TEST_CASE("time order") {
  std::ostringstream a, b;
  a << "t,gx,gy,gz,ax,ay,az,mx,my,mz\n";
  b << a.str();
  // neighbours swapped: repaired
  for (int k : {0, 2, 1, 3, 4, 5}) a << 0.01 * k << ",0,0,0,0,0,9.8,1,0,0\n";
  CHECK(parse_stream(a.str(), 100.0).size() == 6);
  // shuffled: rejected
  std::vector<int> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(5));
  for (int k : order) b << 0.01 * k << ",0,0,0,0,0,9.8,1,0,0\n";
  CHECK(code_of([&] { parse_stream(b.str(), 100.0); }) == ErrorCode::TimeOrderError);
}

TEST_CASE("jittered 99.7 Hz input resampled to 100 Hz") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> jit(-0.002, 0.002);
  auto f = [](double t) { return std::sin(2.0 * kPi * 1.3 * t); };
  std::ostringstream text;
  text << "t,gx,gy,gz,ax,ay,az,mx,my,mz\n";
  text.precision(17);
  text << 0.0 << "," << f(0.0) << ",0,0,0,0,9.8,1,0,0\n";
  for (int k = 1; k < 997; ++k) {
    const double t = k / 99.7 + jit(rng);
    text << t << "," << f(t) << ",0,0,0,0,9.8,1,0,0\n";
  }
  const ImuStream s = parse_stream(text.str(), 100.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    CHECK(std::abs(s[k].t - 0.01 * k) < 1e-12);
    worst = std::max(worst, std::abs(s[k].gyro.x() - f(s[k].t)));
  }
  // linear interpolation over gaps below 1.5 periods: bounded by the curvature term
  const double bound = std::pow(2.0 * kPi * 1.3, 2) * std::pow(0.015, 2) / 8.0;
  CHECK(worst < bound);
  CHECK(s.size() >= 995);
}

TEST_CASE("write then load is bit-identical") {
  const Scenario sc = make_scenario("gimbal", 8, 3.0);
  const SimulationResult sim = simulate(sc.gimbal, sc.trajectory, sc.noise);
  const fs::path p = scratch("round.csv"), q = scratch("round2.csv");
  write_stream(p.string(), sim.stream1);
  const ImuStream a = load_stream(p.string(), 100.0);
  write_stream(q.string(), a);
  const ImuStream b = load_stream(q.string(), 100.0);
  REQUIRE(a.size() == sim.stream1.size());
  REQUIRE(b.size() == a.size());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same &= bit_equal(a[i].t, sim.stream1[i].t) && bit_equal(b[i].t, a[i].t);
    for (int c = 0; c < 3; ++c)
      same &= bit_equal(a[i].gyro[c], sim.stream1[i].gyro[c]) && bit_equal(a[i].accel[c], sim.stream1[i].accel[c]) &&
              bit_equal(a[i].mag[c], sim.stream1[i].mag[c]) && bit_equal(b[i].gyro[c], a[i].gyro[c]) &&
              bit_equal(b[i].accel[c], a[i].accel[c]) && bit_equal(b[i].mag[c], a[i].mag[c]);
  }
  CHECK(same);
  CHECK(format_stream(a) == format_stream(b));
}

TEST_CASE("preprocess") {
  SUBCASE("constant gyro bias removed") {
    const ImuStream out = preprocess(still(400, Vec3(0.01, -0.005, 0.008)), PreprocessConfig{});
    for (const ImuSample& s : out) CHECK(s.gyro.norm() == 0.0);
  }
  SUBCASE("2 Hz passes the 15 Hz low-pass") {
    std::vector<double> x;
    for (int k = 0; k < 1000; ++k) x.push_back(std::sin(2.0 * kPi * 2.0 * 0.01 * k));
    const std::vector<double> y = lowpass_zero_phase(x, 15.0, 100.0);
    double peak = 0.0;
    for (int k = 200; k < 800; ++k) peak = std::max(peak, std::abs(y[k]));
    CHECK(peak > 0.99);
    CHECK(peak < 1.01);
  }
  SUBCASE("zero-rate threshold") {
    ImuStream s = {sample(0.0, Vec3(0.9, 0, 0)), sample(0.01, Vec3(0, 1.1, 0)), sample(0.02, Vec3(0.6, 0.6, 0))};
    zero_rate_reset(s, 1.0);
    CHECK(s[0].gyro.norm() == 0.0);
    CHECK(s[1].gyro.y() == 1.1);
    CHECK(s[2].gyro.norm() == 0.0);
  }
  SUBCASE("too short") {
    CHECK(code_of([] { preprocess(still(5), PreprocessConfig{}); }) == ErrorCode::TooShort);
    CHECK(code_of([] { lowpass_zero_phase(std::vector<double>(9, 1.0), 15.0, 100.0); }) == ErrorCode::TooShort);
  }
  SUBCASE("no stationary stretch") {
    ImuStream s;
    for (int k = 0; k < 400; ++k) s.push_back(sample(0.01 * k, Vec3(3.0 * std::sin(0.05 * k), 0, 0)));
    CHECK(code_of([&] { preprocess(s, PreprocessConfig{}); }) == ErrorCode::TooShort);
  }
  SUBCASE("idempotent on clean still data") {
    const ImuStream a = preprocess(still(500), PreprocessConfig{});
    const ImuStream b = preprocess(a, PreprocessConfig{});
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max({worst, (a[i].gyro - b[i].gyro).norm(), (a[i].accel - b[i].accel).norm(),
                        (a[i].mag - b[i].mag).norm()});
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("truth, angle and event files") {
  const Scenario sc = make_scenario("hinge", 2, 2.0);
  const SimulationResult sim = simulate(sc.gimbal, sc.trajectory, sc.noise);
  const fs::path tp = scratch("truth.csv");
  write_truth(tp.string(), sim.truth);
  const TruthTable tt = load_truth(tp.string());
  REQUIRE(tt.t.size() == sim.truth.t.size());
  CHECK(tt.angles[57][2] == sim.truth.angles[57][2]);
  REQUIRE(tt.header.count("h1") == 1);
  CHECK(tt.header.at("h1")[1] == sim.truth.h1.y());

  std::vector<JointAngles> ang(3);
  for (int i = 0; i < 3; ++i) {
    ang[i].t = 0.01 * i;
    ang[i].angle_j3 = 0.1 * i;
  }
  ang[2].source = AngleSource::DetectionFallback;
  const fs::path ap = scratch("angles.csv");
  write_angles(ap.string(), ang);
  const AngleTable at = load_angles(ap.string());
  REQUIRE(at.t.size() == 3);
  CHECK(at.angles[2][2] == 0.2);
  CHECK(at.source[2] == "DetectionFallback");

  const fs::path ep = scratch("events.jsonl");
  write_events(ep.string(), {{1.5, EventKind::MovementDetected, 0.3}, {2.0, EventKind::WindowSolved, std::nullopt}});
  std::ifstream in(ep);
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l1.find("\"MovementDetected\"") != std::string::npos);
  CHECK(l2.find("null") != std::string::npos);
}

TEST_CASE("config") {
  const RunConfig c = parse_config("# comment\nwindow_len = 400\ninterval_len=500  # trailing\njoint = ankle\n"
                                   "projection = axis\ndetector_enabled = false\n");
  CHECK(c.pipeline.window.window_len == 400);
  CHECK(c.pipeline.window.interval_len == 500);
  CHECK(c.joint == "ankle");
  CHECK(c.pipeline.detector.threshold == default_detector_threshold("ankle"));
  CHECK(c.pipeline.projection == ProjectionMode::Axis);
  CHECK_FALSE(c.pipeline.detector.enabled);

  CHECK(code_of([] { parse_config("windowlen = 3\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("window_len = -3\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("calibrate = maybe\n"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_config("just words\n"); }) == ErrorCode::ConfigError);
  for (const std::string& k : config_keys()) CHECK_FALSE(k.empty());

  const fs::path p = scratch("run.cfg");
  std::ofstream(p) << "feedback_iters = 3\n";
  ::setenv("JOINTKIN_CONFIG", p.string().c_str(), 1);
  CHECK(load_config("").pipeline.window.feedback_iters == 3);
  ::unsetenv("JOINTKIN_CONFIG");
  CHECK(load_config("").pipeline.window.feedback_iters == 6);
}

}  // TEST_SUITE
