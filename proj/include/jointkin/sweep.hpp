#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "jointkin/gimbal_sim.hpp"
#include "jointkin/pipeline.hpp"

namespace jointkin {

struct SweepCell {
  std::size_t window_len = 0, interval_len = 0;
  std::array<double, 3> rmse{};  // deg, per axis (j1, j2, j3)
  std::array<double, 3> correlation{};
  double f = 0.0;                // weighted metric with a = (2, 1, 1), correlations as normalizers
  double mean_solve_seconds = 0.0;
};

struct SweepSpec {
  std::vector<std::size_t> window_lens = {200, 300, 400, 500, 600};
  std::size_t interval_max = 800;
  std::size_t interval_step = 100;
  // angles before this time are left out of every cell so all cells cover
  // the same samples; defaults to the largest window
  double score_from = -1.0;
};

// Runs the pipeline on one simulated recording for every (W, I) with
// W <= I <= interval_max. Uses the oracle orientations of the truth record.
std::vector<SweepCell> run_sweep(const SimulationResult& sim, const PipelineConfig& base, const SweepSpec& spec);

// Wall time of one feedback_iteration on `window_len` samples taken from
// the middle of the recording, median of `repeats` runs.
double time_window_solve(const SimulationResult& sim, const PipelineConfig& base, std::size_t window_len,
                         int repeats = 5);

}  // namespace jointkin
