#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jointkin/axis_est.hpp"
#include "jointkin/imu.hpp"
#include "jointkin/math.hpp"
#include "jointkin/orientation.hpp"
#include "jointkin/refcal.hpp"

namespace jointkin {

struct WindowConfig {
  std::size_t window_len = 300;    // W_n
  std::size_t interval_len = 300;  // I_n
  std::size_t interval_cap = 800;
  int feedback_iters = 6;
  std::size_t detection_len = 50;
};

struct MovementDetectorConfig {
  double v1 = 0.4, v2 = 0.4, v3 = 0.2;
  double threshold = 0.15;
  bool enabled = true;
  // Pull of the short detection solves toward the current axes (rad/s per
  // unit axis deviation); keeps V near zero while nothing moves.
  double hinge_prior_weight = 1.0;
  std::size_t refresh_position_min = 100;
  // detection starts after this many window solves since the last reset;
  // the first window often spans filter convergence and start-up ramps
  std::size_t arm_after_windows = 2;
};

// Threshold defaults per joint label. Axis differences of unit vectors are
// bounded by sqrt(2) after sign alignment, so these sit well below the
// values one would pick for unnormalized axes.
double default_detector_threshold(const std::string& joint);

// What the feedback passes subtract from the gyro signals before re-solving
// the hinge.
enum class ProjectionMode {
  Axis,       // w_i - (w_i . j_i) j_i on each sensor
  JointRate,  // remove the estimated secondary joint rates from w2
  None,
};

struct PipelineConfig {
  WindowConfig window;
  MovementDetectorConfig detector;
  HingeOptions hinge;
  SecondaryOptions secondary;
  SolverOptions coeff_solver{.max_iter = 40, .damping_init = 1e-3, .tol_step = 1e-8, .tol_grad = 1e-10,
                             .finite_diff_h = 1e-5, .jacobian_refresh = 10};
  OrientationConfig orientation;
  ProjectionMode projection = ProjectionMode::None;
  bool calibrate = true;             // reference-frame calibration
  bool twist_decomposition = false;  // main angle as twist about j3 instead of 2 acos(w)
  double sample_rate = 100.0;
  double max_gap = 0.5;              // s
  double max_step_deg = 30.0;        // continuity gate, reported only
  // Mounting convention used to seed the secondary axes before any window
  // has been solved: j1 near sensor-1 x, j2 near sensor-2 z.
  Vec3 initial_j1 = Vec3::UnitX();
  Vec3 initial_j2 = Vec3::UnitZ();
  // The main axis in sensor 1 is signed to point along this direction; it
  // also fixes the sign of the main angle.
  Vec3 initial_h1 = Vec3::UnitY();
};

struct JointModel {
  HingeEstimate hinge;
  JointPositionEstimate positions;
  ThreeDofAxes axes;
  ReferenceFrameCorrection refcal;
  // Where the secondary-axis prior points, in sensor coordinates. Starts at
  // the mounting convention and follows detected mount changes.
  Vec3 anchor_j1 = Vec3::UnitX();
  Vec3 anchor_j2 = Vec3::UnitZ();
  // sign reference for the main axis in sensor 1
  Vec3 anchor_h1 = Vec3::UnitY();
  bool secondary_valid = false;
  bool valid = false;
};

// Per-sample inputs for one span of the stream.
struct WindowView {
  const ImuStream* s1 = nullptr;
  const ImuStream* s2 = nullptr;
  const std::vector<Quat>* q1 = nullptr;
  const std::vector<Quat>* q2 = nullptr;
  const std::vector<Quat>* q_mag = nullptr;
  const std::vector<Quat>* q_acc = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// w - (w . axis) axis
Vec3 subtract_axis_projection(const Vec3& w, const Vec3& axis);

// x = j, z = (j x o)/|j x o|, y = z x x, as columns. Throws DegenerateGeometry.
Mat3 body_frame_from_hinge(const Vec3& j, const Vec3& o);

// Frames for the 3-DoF decomposition: segment 1 takes x = j1, segment 2
// takes z = j2; both take y from the main axis made orthogonal.
Mat3 body_frame_1(const Vec3& j1, const Vec3& j3);
Mat3 body_frame_2(const Vec3& j2, const Vec3& j3);

// 2 acos(w) with the sign of the rotation axis along `axis` (b-frame coordinates).
double main_axis_angle(const Quat& q_b1_b2, const Vec3& axis = Vec3::UnitX());
// Twist angle of q about `axis`.
double twist_angle(const Quat& q, const Vec3& axis);

// V = sum v_i |j_i,iter - j_i,det| with det axes sign-aligned to iter axes.
// The main-axis term averages the two sensor-frame copies.
double movement_metric(const ThreeDofAxes& iter, const ThreeDofAxes& det, const MovementDetectorConfig& cfg);

// Feedback passes over one window: projection, hinge, positions,
// calibration coefficients, secondary axes. `previous` seeds solvers and
// priors. Throws when the hinge cannot be solved.
JointModel feedback_iteration(const WindowView& w, const PipelineConfig& cfg, const JointModel* previous,
                              std::vector<double>* pass_cost = nullptr);

// Short-window solve used for movement detection. Anchors and positions are
// carried over from `current` through the estimated mount change.
// With `seed` set (fallback refresh after a detection) the hinge starts from
// the seed without a prior toward `current`, and positions are re-solved once
// the span holds at least refresh_position_min samples.
struct DetectionResult {
  JointModel model;
  bool stale = false;
};
DetectionResult run_detection_window(const WindowView& w, const PipelineConfig& cfg, const JointModel& current,
                                     const JointModel* seed = nullptr);

struct SampleAngles {
  double j1 = 0.0, j2 = 0.0, j3 = 0.0;
  bool gimbal_lock = false;
};

// Angles for one sample. g1, g2: sensor -> own reference; c: [g2] -> [g1].
SampleAngles angles_for_sample(const JointModel& m, const Quat& g1, const Quat& g2, const Quat& c,
                               bool twist_decomposition);

// Main-axis angle alone, from the hinge frames.
double main_angle_for_sample(const JointModel& m, const Quat& g1, const Quat& g2, const Quat& c,
                             bool twist_decomposition);

enum class AngleSource { NormalInterval, DetectionFallback };

struct JointAngles {
  double t = 0.0;
  std::size_t index = 0;
  double angle_j1 = 0.0, angle_j2 = 0.0, angle_j3 = 0.0;
  AngleSource source = AngleSource::NormalInterval;
};

enum class EventKind { WindowSolved, MovementDetected, FallbackEngaged, WindowRestarted, WindowSkipped, StreamGap };

struct PipelineEvent {
  double t = 0.0;
  EventKind kind = EventKind::WindowSolved;
  std::optional<double> V;
};

std::string to_string(AngleSource s);
std::string to_string(EventKind k);

struct SolvedWindow {
  double t = 0.0;
  std::size_t begin = 0, end = 0;
  JointModel model;
};

struct DetectionTrace {
  double t = 0.0;
  double V = 0.0;
  bool stale = false;
};

struct PipelineResult {
  std::vector<JointAngles> angles;
  std::vector<PipelineEvent> events;
  std::vector<SolvedWindow> windows;
  std::vector<DetectionTrace> detections;  // every detection-window check outside fallback
};

// Orientation series to use instead of running the filter (simulator oracle).
struct OrientationSeries {
  std::vector<Quat> q1, q2;
};

// Algorithm driver. Streams must share a time base. Without `orientations`
// the complementary filter runs on each stream.
PipelineResult process_stream(const ImuStream& s1, const ImuStream& s2, const PipelineConfig& cfg,
                              const OrientationSeries* orientations = nullptr);

}  // namespace jointkin
