// jointkin: simulate / estimate / evaluate / sweep
//
// exit codes: 0 ok, 1 usage or config, 2 data error, 3 estimation failure

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointkin/error.hpp"
#include "jointkin/gimbal_sim.hpp"
#include "jointkin/io.hpp"
#include "jointkin/metrics.hpp"
#include "jointkin/pipeline.hpp"
#include "jointkin/sweep.hpp"

using namespace jointkin;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kEstimation = 3 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
      return kUsage;
    case ErrorCode::IoError:
    case ErrorCode::SchemaError:
    case ErrorCode::TimeOrderError:
    case ErrorCode::ShapeError:
    case ErrorCode::TooShort:
    case ErrorCode::InvalidSample:
    case ErrorCode::EventOutOfRange:
    case ErrorCode::ZeroRange:
    case ErrorCode::ZeroVariance:
    case ErrorCode::IncompleteTable:
      return kData;
    default:
      return kEstimation;
  }
}

struct SimArgs {
  std::string scenario = "gimbal";
  std::uint64_t seed = 1;
  double duration = 60.0;
  double offset_deg = 0.0;
  bool warp_field = false;
  bool clean = false;
  double event_t = -1.0;
  double event_deg = 30.0;
  int event_imu = 2;
  std::string out = ".";
};

struct EstimateArgs {
  std::string imu1, imu2, config, joint;
  std::string out_angles = "angles.csv", out_events = "events.jsonl";
  bool preprocess = false, no_calibrate = false, no_detect = false, twist = false;
  std::size_t window = 0, interval = 0;
};

struct EvaluateArgs {
  std::string angles, truth, out;
  double k = 1.0;
};

struct SweepArgs {
  std::string scenario = "walking";
  std::uint64_t seed = 1;
  double duration = 120.0;
  bool noisy = false;
  std::string out = "sweep.csv";
  std::vector<std::size_t> windows = {200, 300, 400, 500, 600};
  std::size_t interval_max = 800, interval_step = 100;
};

SimulationResult run_simulation(const SimArgs& a) {
  Scenario sc = make_scenario(a.scenario, a.seed, a.duration);
  sc.gimbal.ref_offset = rot_z(rad(a.offset_deg));
  sc.gimbal.realistic_offset = a.warp_field;
  if (a.clean) sc.noise = NoiseSpec{};
  SimulationResult sim = simulate(sc.gimbal, sc.trajectory, sc.noise);
  if (a.event_t >= 0.0) {
    SensorMovementEvent ev;
    ev.t = a.event_t;
    ev.imu = a.event_imu;
    ev.rotation = rot_x(rad(a.event_deg));
    ImuStream& s = a.event_imu == 1 ? sim.stream1 : sim.stream2;
    s = apply_event(s, ev);
  }
  return sim;
}

int cmd_simulate(const SimArgs& a) {
  const SimulationResult sim = run_simulation(a);
  fs::create_directories(a.out);
  write_stream((fs::path(a.out) / "imu1.csv").string(), sim.stream1);
  write_stream((fs::path(a.out) / "imu2.csv").string(), sim.stream2);
  write_truth((fs::path(a.out) / "truth.csv").string(), sim.truth);
  std::printf("wrote %zu samples to %s\n", sim.stream1.size(), a.out.c_str());
  return kOk;
}

int cmd_estimate(const EstimateArgs& a) {
  RunConfig rc = load_config(a.config);
  if (!a.joint.empty()) rc = parse_config("joint = " + a.joint, rc);
  if (a.preprocess) rc.preprocess = true;
  if (a.no_calibrate) rc.pipeline.calibrate = false;
  if (a.no_detect) rc.pipeline.detector.enabled = false;
  if (a.twist) rc.pipeline.twist_decomposition = true;
  if (a.window) rc.pipeline.window.window_len = a.window;
  if (a.interval) rc.pipeline.window.interval_len = a.interval;
  rc.validate();

  ImuStream s1 = load_stream(a.imu1, rc.sample_rate);
  ImuStream s2 = load_stream(a.imu2, rc.sample_rate);
  // trim to the common time span
  if (!s1.empty() && !s2.empty()) {
    const double dt = 1.0 / rc.sample_rate;
    while (!s1.empty() && !s2.empty() && s1.front().t < s2.front().t - 0.5 * dt) s1.erase(s1.begin());
    while (!s1.empty() && !s2.empty() && s2.front().t < s1.front().t - 0.5 * dt) s2.erase(s2.begin());
    const std::size_t n = std::min(s1.size(), s2.size());
    s1.resize(n);
    s2.resize(n);
  }
  if (rc.preprocess) {
    s1 = preprocess(s1, rc.preprocess_config());
    s2 = preprocess(s2, rc.preprocess_config());
  }
  const PipelineResult res = process_stream(s1, s2, rc.pipeline);
  write_angles(a.out_angles, res.angles);
  write_events(a.out_events, res.events);
  std::size_t detected = 0;
  for (const PipelineEvent& e : res.events) detected += e.kind == EventKind::MovementDetected;
  std::printf("%zu samples in, %zu angle rows, %zu windows, %zu movement events\n", s1.size(), res.angles.size(),
              res.windows.size(), detected);
  return kOk;
}

int cmd_evaluate(const EvaluateArgs& a) {
  const AngleTable est = load_angles(a.angles);
  const TruthTable tr = load_truth(a.truth);
  if (tr.t.size() < 2) throw Error(ErrorCode::ShapeError, "truth file has fewer than two rows");
  const double dt = (tr.t.back() - tr.t.front()) / (tr.t.size() - 1);

  std::array<AngleSeriesPair, 3> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < est.t.size(); ++i) {
    while (j + 1 < tr.t.size() && tr.t[j + 1] <= est.t[i] + 0.5 * dt) ++j;
    if (std::abs(tr.t[j] - est.t[i]) > 0.5 * dt) throw Error(ErrorCode::ShapeError, "no truth sample near t=" + std::to_string(est.t[i]));
    for (int ax = 0; ax < 3; ++ax) {
      pairs[ax].t.push_back(est.t[i]);
      pairs[ax].estimated.push_back(est.angles[i][ax]);
      pairs[ax].reference.push_back(tr.angles[j][ax]);
    }
  }

  nlohmann::json out;
  out["samples"] = est.t.size();
  const char* names[3] = {"j1", "j2", "j3"};
  for (int ax = 0; ax < 3; ++ax) {
    nlohmann::json m;
    m["rmse_deg"] = rmse(pairs[ax]);
    try {
      m["rmse_percent"] = rmse_percent(pairs[ax]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroRange) throw;
      m["rmse_percent"] = nullptr;
    }
    try {
      m["correlation"] = correlation(pairs[ax]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      m["correlation"] = nullptr;
    }
    const BlandAltman ba = bland_altman(pairs[ax].reference, pairs[ax].estimated, a.k);
    m["bland_altman"] = {{"mean_deg", ba.mean_diff}, {"sd_deg", ba.sd_diff}, {"lower_deg", ba.lower}, {"upper_deg", ba.upper}, {"k", a.k}};
    out[names[ax]] = m;
  }
  const std::string text = out.dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(a.out);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + a.out);
    f << text;
  }
  return kOk;
}

int cmd_sweep(const SweepArgs& a) {
  SimArgs sa;
  sa.scenario = a.scenario;
  sa.seed = a.seed;
  sa.duration = a.duration;
  sa.clean = !a.noisy;
  const SimulationResult sim = run_simulation(sa);
  SweepSpec spec;
  spec.window_lens = a.windows;
  spec.interval_max = a.interval_max;
  spec.interval_step = a.interval_step;
  PipelineConfig cfg;
  cfg.detector.enabled = false;
  const std::vector<SweepCell> cells = run_sweep(sim, cfg, spec);

  std::ofstream f(a.out);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + a.out);
  f << "window_len,interval_len,rmse_j1,rmse_j2,rmse_j3,corr_j1,corr_j2,corr_j3,f,solve_seconds\n";
  for (const SweepCell& c : cells) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", c.window_len, c.interval_len,
                  c.rmse[0], c.rmse[1], c.rmse[2], c.correlation[0], c.correlation[1], c.correlation[2], c.f,
                  c.mean_solve_seconds);
    f << buf;
  }
  std::printf("%zu cells written to %s\n", cells.size(), a.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint angle estimation from two IMUs"};
  app.require_subcommand(1);

  SimArgs sim;
  auto* s = app.add_subcommand("simulate", "write a simulated recording (imu1.csv, imu2.csv, truth.csv)");
  s->add_option("--scenario", sim.scenario, "hinge, gimbal or walking")->capture_default_str();
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--duration", sim.duration, "seconds")->capture_default_str();
  s->add_option("--offset-deg", sim.offset_deg, "heading offset of the IMU 2 reference frame (needs --warp-field)")
      ->capture_default_str();
  s->add_flag("--warp-field", sim.warp_field, "realise the offset as a rotated field at IMU 2");
  s->add_flag("--clean", sim.clean, "no sensor noise");
  s->add_option("--event-t", sim.event_t, "time of a sensor mount shift");
  s->add_option("--event-deg", sim.event_deg, "mount shift about the sensor x axis")->capture_default_str();
  s->add_option("--event-imu", sim.event_imu)->check(CLI::IsMember({1, 2}))->capture_default_str();
  s->add_option("-o,--out", sim.out, "output directory")->capture_default_str();

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "estimate joint angles from two stream files");
  e->add_option("--imu1", est.imu1)->required()->check(CLI::ExistingFile);
  e->add_option("--imu2", est.imu2)->required()->check(CLI::ExistingFile);
  e->add_option("--config", est.config, "key = value file (default: $JOINTKIN_CONFIG)");
  e->add_option("--joint", est.joint, "hip, knee or ankle");
  e->add_option("--angles", est.out_angles)->capture_default_str();
  e->add_option("--events", est.out_events)->capture_default_str();
  e->add_flag("--preprocess", est.preprocess, "low-pass, bias removal and zero-rate reset");
  e->add_flag("--no-calibrate", est.no_calibrate);
  e->add_flag("--no-detect", est.no_detect);
  e->add_flag("--twist", est.twist, "main angle by swing-twist");
  e->add_option("--window", est.window, "window length in samples");
  e->add_option("--interval", est.interval, "interval length in samples");

  EvaluateArgs ev;
  auto* v = app.add_subcommand("evaluate", "compare an angle file with a truth file");
  v->add_option("--angles", ev.angles)->required()->check(CLI::ExistingFile);
  v->add_option("--truth", ev.truth)->required()->check(CLI::ExistingFile);
  v->add_option("-o,--out", ev.out, "JSON output (default stdout)");
  v->add_option("--k", ev.k, "Bland-Altman limit multiplier")->capture_default_str();

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "window/interval grid on a simulated recording");
  w->add_option("--scenario", sw.scenario)->capture_default_str();
  w->add_option("--seed", sw.seed)->capture_default_str();
  w->add_option("--duration", sw.duration)->capture_default_str();
  w->add_flag("--noisy", sw.noisy);
  w->add_option("--windows", sw.windows)->delimiter(',');
  w->add_option("--interval-max", sw.interval_max)->capture_default_str();
  w->add_option("--interval-step", sw.interval_step)->capture_default_str();
  w->add_option("-o,--out", sw.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*e) return cmd_estimate(est);
    if (*v) return cmd_evaluate(ev);
    if (*w) return cmd_sweep(sw);
  } catch (const Error& err) {
    std::fprintf(stderr, "jointkin: %s\n", err.what());
    return exit_code(err.code());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "jointkin: %s\n", err.what());
    return kData;
  }
  return kUsage;
}
