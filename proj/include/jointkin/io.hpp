#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jointkin/gimbal_sim.hpp"
#include "jointkin/imu.hpp"
#include "jointkin/pipeline.hpp"

namespace jointkin {

// canonical name (t, gx .. mz) -> header name in the file; missing keys map
// to themselves
using ColumnMap = std::map<std::string, std::string>;

// Reads a stream CSV and resamples it linearly onto a uniform grid starting
// at the first timestamp. Rows already on the grid are copied verbatim.
// Timestamps may be out of order by up to 3 rows; anything worse is a
// TimeOrderError. Duplicate timestamps keep the first row.
ImuStream load_stream(const std::string& path, double sample_rate, const ColumnMap& columns = {});
ImuStream parse_stream(const std::string& text, double sample_rate, const ColumnMap& columns = {},
                       const std::string& origin = "<string>");
void write_stream(const std::string& path, const ImuStream& s);
std::string format_stream(const ImuStream& s);

struct PreprocessConfig {
  double sample_rate = 100.0;
  double lowpass_cutoff = 15.0;
  double zero_rate_threshold = 1.0;  // rad/s
  double stationary_gyro_rms = 0.02;  // rad/s
  double stationary_min_time = 1.0;   // s
};

// 2nd-order Butterworth run forward and backward. Throws TooShort when the
// series is not longer than the edge padding (9 samples).
std::vector<double> lowpass_zero_phase(const std::vector<double>& x, double cutoff, double sample_rate);
// lowpass_zero_phase on every gyro, accel and mag channel.
ImuStream lowpass_stream(const ImuStream& s, double cutoff, double sample_rate);
// Samples with |gyro| below the threshold become exactly zero.
void zero_rate_reset(ImuStream& s, double threshold);

struct StationarySegment {
  std::size_t begin = 0, end = 0;
};
// Longest run of samples whose centred 1 s gyro magnitude RMS stays below
// the threshold. Throws TooShort if no run reaches the minimum time.
StationarySegment longest_stationary_segment(const ImuStream& s, const PreprocessConfig& cfg);

// Low-pass, bias removal, zero-rate reset, magnetometer scaling.
ImuStream preprocess(const ImuStream& s, const PreprocessConfig& cfg);

// Ground truth file: '#' header block with static coordinates, then
// t,angle_j1,angle_j2,angle_j3 in radians.
void write_truth(const std::string& path, const GroundTruth& gt);
struct TruthTable {
  std::vector<double> t;
  std::vector<std::array<double, 3>> angles;
  std::map<std::string, std::vector<double>> header;
};
TruthTable load_truth(const std::string& path);

void write_angles(const std::string& path, const std::vector<JointAngles>& angles);
struct AngleTable {
  std::vector<double> t;
  std::vector<std::array<double, 3>> angles;
  std::vector<std::string> source;
};
AngleTable load_angles(const std::string& path);
// one JSON object per line: {"t":..,"kind":..,"V":..}
void write_events(const std::string& path, const std::vector<PipelineEvent>& events);

// Everything the CLI can set from a config file.
struct RunConfig {
  double sample_rate = 100.0;
  double lowpass_cutoff = 15.0;
  double zero_rate_threshold = 1.0;
  std::string joint = "knee";
  std::uint64_t seed = 1;
  bool preprocess = false;
  PipelineConfig pipeline;
  bool threshold_overridden = false;

  PreprocessConfig preprocess_config() const;
  void validate() const;  // ConfigError on bad values
};

// Flat "key = value" text; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(const std::string& text, RunConfig base = {});
// Reads `path`, or $JOINTKIN_CONFIG when path is empty; no file and no
// variable returns the defaults.
RunConfig load_config(const std::string& path);
std::vector<std::string> config_keys();

}  // namespace jointkin
