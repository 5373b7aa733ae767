#include "jointkin/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "jointkin/error.hpp"
#include "jointkin/metrics.hpp"
#include "jointkin/refcal.hpp"

namespace jointkin {

std::vector<SweepCell> run_sweep(const SimulationResult& sim, const PipelineConfig& base, const SweepSpec& spec) {
  if (spec.window_lens.empty()) throw Error(ErrorCode::ConfigError, "no window lengths to sweep");
  if (spec.interval_step == 0) throw Error(ErrorCode::ConfigError, "interval step must be positive");
  const GroundTruth& gt = sim.truth;
  OrientationSeries os{gt.ref1, gt.ref2};
  const std::size_t wmax = *std::max_element(spec.window_lens.begin(), spec.window_lens.end());
  const double from = spec.score_from >= 0.0 ? spec.score_from : wmax / base.sample_rate;

  std::vector<SweepCell> cells;
  for (std::size_t W : spec.window_lens) {
    for (std::size_t I = W; I <= spec.interval_max; I += spec.interval_step) {
      PipelineConfig cfg = base;
      cfg.window.window_len = W;
      cfg.window.interval_len = I;
      cfg.window.interval_cap = std::max(cfg.window.interval_cap, I);
      const auto t0 = std::chrono::steady_clock::now();
      const PipelineResult res = process_stream(sim.stream1, sim.stream2, cfg, &os);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      SweepCell c;
      c.window_len = W;
      c.interval_len = I;
      c.mean_solve_seconds = res.windows.empty() ? 0.0 : secs / res.windows.size();
      std::array<double, 3> corr{};
      for (int ax = 0; ax < 3; ++ax) {
        AngleSeriesPair p;
        for (const JointAngles& a : res.angles) {
          if (a.t < from) continue;
          p.estimated.push_back(ax == 0 ? a.angle_j1 : ax == 1 ? a.angle_j2 : a.angle_j3);
          p.reference.push_back(gt.angles[a.index][ax]);
        }
        if (p.estimated.empty()) throw Error(ErrorCode::TooShort, "recording too short for the sweep");
        c.rmse[ax] = rmse(p);
        corr[ax] = correlation(p);
      }
      c.correlation = corr;
      WindowMetricTable table;
      table.rmse = {{c.rmse[0], c.rmse[1], c.rmse[2]}};
      table.mu = {corr};
      c.f = weighted_window_metric(table);
      cells.push_back(c);
    }
  }
  return cells;
}

double time_window_solve(const SimulationResult& sim, const PipelineConfig& base, std::size_t window_len,
                         int repeats) {
  if (sim.stream1.size() < window_len) throw Error(ErrorCode::TooShort, "recording shorter than the window");
  const GroundTruth& gt = sim.truth;
  // centred in the recording, away from the start-up ramp
  const std::size_t b = (sim.stream1.size() - window_len) / 2;
  const std::size_t e = b + window_len;
  std::vector<Quat> q_mag(sim.stream1.size()), q_acc(sim.stream1.size());
  for (std::size_t i = b; i < e; ++i) {
    q_acc[i] = correction_from_pair(gt.ref1[i], sim.stream1[i].accel, gt.ref2[i], sim.stream2[i].accel).q;
    q_mag[i] = correction_from_pair(gt.ref1[i], sim.stream1[i].mag, gt.ref2[i], sim.stream2[i].mag).q;
  }
  WindowView v;
  v.s1 = &sim.stream1;
  v.s2 = &sim.stream2;
  v.q1 = &gt.ref1;
  v.q2 = &gt.ref2;
  v.q_mag = &q_mag;
  v.q_acc = &q_acc;
  v.begin = b;
  v.end = e;

  std::vector<double> times;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const JointModel m = feedback_iteration(v, base, nullptr);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (!m.valid) throw Error(ErrorCode::InsufficientMotion, "window solve failed");
  }
  std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
  return times[times.size() / 2];
}

}  // namespace jointkin
