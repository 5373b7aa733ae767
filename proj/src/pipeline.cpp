#include "jointkin/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jointkin/error.hpp"

namespace jointkin {

namespace {

Vec3 aligned(const Vec3& v, const Vec3& ref) { return v.dot(ref) < 0.0 ? Vec3(-v) : v; }

Vec3 orthogonalized(const Vec3& v, const Vec3& against) {
  const Vec3 u = against.normalized();
  Vec3 r = v - v.dot(u) * u;
  if (r.norm() < 1e-9) r = any_orthogonal(u);
  return r.normalized();
}

struct WindowArrays {
  std::vector<Vec3> w1, w2, a1, a2;
  std::vector<Mat3> G1, G2;
};

WindowArrays gather(const WindowView& v) {
  WindowArrays a;
  const std::size_t n = v.size();
  a.w1.reserve(n);
  a.w2.reserve(n);
  a.a1.reserve(n);
  a.a2.reserve(n);
  a.G1.reserve(n);
  a.G2.reserve(n);
  for (std::size_t i = v.begin; i < v.end; ++i) {
    a.w1.push_back((*v.s1)[i].gyro);
    a.w2.push_back((*v.s2)[i].gyro);
    a.a1.push_back((*v.s1)[i].accel);
    a.a2.push_back((*v.s2)[i].accel);
    a.G1.push_back(to_matrix((*v.q1)[i]));
    a.G2.push_back(to_matrix((*v.q2)[i]));
  }
  return a;
}

std::vector<Mat3> corrections(const WindowView& v, const ReferenceFrameCorrection& rc, bool calibrate) {
  std::vector<Mat3> C;
  C.reserve(v.size());
  for (std::size_t i = v.begin; i < v.end; ++i)
    C.push_back(calibrate ? to_matrix(fuse((*v.q_mag)[i], (*v.q_acc)[i], rc.k_mag, rc.k_acc)) : Mat3::Identity());
  return C;
}

// Flip h2 so both main-axis copies point the same way in [g1].
void align_hinge_pair(HingeEstimate& h, const WindowArrays& a, const std::vector<Mat3>& C) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.G1.size(); ++i) s += (a.G1[i] * h.j1).dot(C[i] * a.G2[i] * h.j2);
  if (s < 0.0) h.j2 = -h.j2;
}

std::vector<ThreeDofSample> threedof_samples(const WindowArrays& a, const std::vector<Mat3>& C, const Vec3& h1) {
  std::vector<ThreeDofSample> out(a.G1.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].r1 = a.G1[i];
    out[i].r2 = C[i] * a.G2[i];
    out[i].w1 = a.w1[i];
    out[i].w2 = a.w2[i];
    out[i].j3_g = a.G1[i] * h1;
  }
  return out;
}

double threedof_cost(const std::vector<ThreeDofSample>& s, const ThreeDofAxes& ax) {
  double acc = 0.0;
  for (const auto& x : s) {
    const double r = threedof_residual(x, ax.j1, ax.j2);
    acc += r * r;
  }
  return s.empty() ? 0.0 : acc / static_cast<double>(s.size());
}

// Removes the estimated secondary joint rates from w2: the relative rate in
// [g1] is split along (j1, j3, j2) and the j1 and j2 parts are taken out.
void remove_joint_rates(std::vector<Vec3>& w2, const WindowArrays& a, const std::vector<Mat3>& C,
                        const ThreeDofAxes& ax, const Vec3& h1) {
  for (std::size_t i = 0; i < w2.size(); ++i) {
    const Mat3 R2 = C[i] * a.G2[i];
    const Vec3 j1g = a.G1[i] * ax.j1;
    const Vec3 j2g = R2 * ax.j2;
    const Vec3 j3g = a.G1[i] * h1;
    Mat3 A;
    A.col(0) = j1g;
    A.col(1) = j3g;
    A.col(2) = j2g;
    if (std::abs(A.determinant()) < 1e-3) continue;
    const Vec3 rates = A.partialPivLu().solve(R2 * a.w2[i] - a.G1[i] * a.w1[i]);
    w2[i] = a.w2[i] - rates[2] * ax.j2 - rates[0] * (R2.transpose() * j1g);
  }
}

}  // namespace

double default_detector_threshold(const std::string& joint) {
  if (joint == "ankle") return 0.2;
  if (joint == "hip" || joint == "knee") return 0.15;
  throw Error(ErrorCode::ConfigError, "unknown joint label '" + joint + "'");
}

Vec3 subtract_axis_projection(const Vec3& w, const Vec3& axis) { return w - w.dot(axis) * axis; }

Mat3 body_frame_from_hinge(const Vec3& j, const Vec3& o) {
  const Vec3 x = j.normalized();
  const Vec3 zc = x.cross(o);
  if (!(zc.norm() > 1e-9)) throw Error(ErrorCode::DegenerateGeometry, "position vector parallel to hinge axis");
  Mat3 B;
  B.col(0) = x;
  B.col(2) = zc.normalized();
  B.col(1) = B.col(2).cross(x);
  return B;
}

Mat3 body_frame_1(const Vec3& j1, const Vec3& j3) {
  Mat3 B;
  B.col(0) = j1.normalized();
  B.col(1) = orthogonalized(j3, j1);
  B.col(2) = B.col(0).cross(B.col(1));
  return B;
}

Mat3 body_frame_2(const Vec3& j2, const Vec3& j3) {
  Mat3 B;
  B.col(2) = j2.normalized();
  B.col(1) = orthogonalized(j3, j2);
  B.col(0) = B.col(1).cross(B.col(2));
  return B;
}

double main_axis_angle(const Quat& q_b1_b2, const Vec3& axis) {
  const Quat q = canonical(q_b1_b2);
  const double a = 2.0 * std::acos(std::clamp(q.w(), -1.0, 1.0));
  return q.vec().dot(axis) < 0.0 ? -a : a;
}

double twist_angle(const Quat& q, const Vec3& axis) {
  const Vec3 u = axis.normalized();
  const double p = q.vec().dot(u);
  double a = 2.0 * std::atan2(p, q.w());
  if (a > kPi) a -= 2.0 * kPi;
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double movement_metric(const ThreeDofAxes& iter, const ThreeDofAxes& det, const MovementDetectorConfig& cfg) {
  const double d1 = (iter.j1 - aligned(det.j1, iter.j1)).norm();
  const double d2 = (iter.j2 - aligned(det.j2, iter.j2)).norm();
  const double d3 = 0.5 * ((iter.j3_s1 - aligned(det.j3_s1, iter.j3_s1)).norm() +
                           (iter.j3_s2 - aligned(det.j3_s2, iter.j3_s2)).norm());
  return cfg.v1 * d1 + cfg.v2 * d2 + cfg.v3 * d3;
}

JointModel feedback_iteration(const WindowView& w, const PipelineConfig& cfg, const JointModel* previous,
                              std::vector<double>* pass_cost) {
  if (w.size() == 0) throw Error(ErrorCode::EmptyWindow, "window has no samples");
  const WindowArrays a = gather(w);
  const double dt = 1.0 / cfg.sample_rate;

  JointModel m;
  if (previous && previous->valid) m = *previous;
  const bool have_prev = previous && previous->valid;
  bool have_secondary = have_prev && previous->secondary_valid;
  if (!have_prev) {
    m.anchor_j1 = cfg.initial_j1.normalized();
    m.anchor_j2 = cfg.initial_j2.normalized();
    m.anchor_h1 = cfg.initial_h1.normalized();
  }
  if (!have_secondary) {
    m.axes.j1 = m.anchor_j1;
    m.axes.j2 = m.anchor_j2;
  }
  if (!cfg.calibrate) m.refcal = ReferenceFrameCorrection{};

  CalibrationWindow cw;
  if (cfg.calibrate) {
    cw.q1.assign(w.q1->begin() + static_cast<std::ptrdiff_t>(w.begin), w.q1->begin() + static_cast<std::ptrdiff_t>(w.end));
    cw.q2.assign(w.q2->begin() + static_cast<std::ptrdiff_t>(w.begin), w.q2->begin() + static_cast<std::ptrdiff_t>(w.end));
    cw.q_mag.assign(w.q_mag->begin() + static_cast<std::ptrdiff_t>(w.begin),
                    w.q_mag->begin() + static_cast<std::ptrdiff_t>(w.end));
    cw.q_acc.assign(w.q_acc->begin() + static_cast<std::ptrdiff_t>(w.begin),
                    w.q_acc->begin() + static_cast<std::ptrdiff_t>(w.end));
  }

  std::vector<Mat3> C = corrections(w, m.refcal, cfg.calibrate);
  const HingeEstimate* seed = have_prev ? &previous->hinge : nullptr;
  HingeEstimate hinge;

  for (int pass = 0; pass < cfg.window.feedback_iters; ++pass) {
    std::vector<Vec3> w1 = a.w1;
    std::vector<Vec3> w2 = a.w2;
    if (pass > 0 && have_secondary) {
      if (cfg.projection == ProjectionMode::Axis) {
        for (auto& v : w1) v = subtract_axis_projection(v, m.axes.j1);
        for (auto& v : w2) v = subtract_axis_projection(v, m.axes.j2);
      } else if (cfg.projection == ProjectionMode::JointRate) {
        remove_joint_rates(w2, a, C, m.axes, hinge.j1);
      }
    }
    try {
      hinge = estimate_hinge(w1, w2, cfg.hinge, seed);
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " (feedback pass " + std::to_string(pass + 1) + ")");
    }
    // the mounting convention decides the sign; a previous window only when
    // the axis is nearly perpendicular to it
    const double along = hinge.j1.dot(m.anchor_h1);
    if (std::abs(along) > 0.2) {
      if (along < 0.0) hinge.j1 = -hinge.j1;
    } else if (have_prev && hinge.j1.dot(previous->hinge.j1) < 0.0) {
      hinge.j1 = -hinge.j1;
    }
    align_hinge_pair(hinge, a, C);
    seed = &hinge;
    m.hinge = hinge;

    if (cfg.calibrate) {
      cw.j1 = hinge.j1;
      cw.j2 = hinge.j2;
      const CoefficientResult cr = optimize_coefficients(cw, m.refcal.k_mag, m.refcal.k_acc, cfg.coeff_solver);
      m.refcal.k_mag = cr.k_mag;
      m.refcal.k_acc = cr.k_acc;
      C = corrections(w, m.refcal, true);
    }

    const std::vector<ThreeDofSample> samples = threedof_samples(a, C, hinge.j1);
    const Vec3 p1 = orthogonalized(m.anchor_j1, hinge.j1);
    const Vec3 p2 = orthogonalized(m.anchor_j2, hinge.j2);
    try {
      ThreeDofAxes ax = estimate_secondary_axes(samples, hinge.j1, hinge.j2, p1, p2, cfg.secondary);
      ax.j1 = aligned(ax.j1, p1);
      ax.j2 = aligned(ax.j2, p2);
      m.axes = ax;
      have_secondary = true;
      m.secondary_valid = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientMotion) throw;
      m.axes.j1 = p1;
      m.axes.j2 = p2;
      m.axes.j3_s1 = hinge.j1;
      m.axes.j3_s2 = hinge.j2;
      m.secondary_valid = have_secondary = false;
    }
    if (pass_cost) pass_cost->push_back(threedof_cost(samples, m.axes));
  }

  m.positions = estimate_positions(a.w1, a.w2, a.a1, a.a2, dt, m.hinge.j1, m.hinge.j2, cfg.hinge);
  m.valid = true;
  return m;
}

DetectionResult run_detection_window(const WindowView& w, const PipelineConfig& cfg, const JointModel& current,
                                     const JointModel* seed) {
  DetectionResult out;
  out.model = seed ? *seed : current;
  const JointModel& start = seed ? *seed : current;
  const WindowArrays a = gather(w);
  HingeOptions ho = cfg.hinge;
  ho.min_samples = std::min(ho.min_samples, w.size());
  HingeEstimate h;
  try {
    h = seed ? estimate_hinge(a.w1, a.w2, ho, &seed->hinge)
             : estimate_hinge(a.w1, a.w2, ho, &current.hinge, &current.hinge, cfg.detector.hinge_prior_weight);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientMotion && e.code() != ErrorCode::SingularSystem) throw;
    out.stale = true;
    return out;
  }
  h.j1 = aligned(h.j1, start.hinge.j1);
  h.j2 = aligned(h.j2, start.hinge.j2);

  // mount change seen by each sensor, as the smallest rotation moving the
  // old hinge onto the new one; a turn about the hinge itself is invisible
  const Mat3 E1 = Eigen::Quaterniond::FromTwoVectors(current.hinge.j1, h.j1).toRotationMatrix();
  const Mat3 E2 = Eigen::Quaterniond::FromTwoVectors(current.hinge.j2, h.j2).toRotationMatrix();
  JointModel m = current;
  m.anchor_j1 = E1 * current.anchor_j1;
  m.anchor_h1 = E1 * current.anchor_h1;
  m.anchor_j2 = E2 * current.anchor_j2;
  m.positions.o1 = E1 * current.positions.o1;
  m.positions.o2 = E2 * current.positions.o2;

  const std::vector<Mat3> C = corrections(w, current.refcal, cfg.calibrate);
  const std::vector<ThreeDofSample> samples = threedof_samples(a, C, h.j1);
  const Vec3 p1 = orthogonalized(m.anchor_j1, h.j1);
  const Vec3 p2 = orthogonalized(m.anchor_j2, h.j2);
  ThreeDofAxes ax;
  try {
    ax = estimate_secondary_axes(samples, h.j1, h.j2, p1, p2, cfg.secondary);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientMotion) throw;
    out.stale = true;
    return out;
  }
  ax.j1 = aligned(ax.j1, p1);
  ax.j2 = aligned(ax.j2, p2);

  m.hinge = h;
  m.axes = ax;
  m.secondary_valid = true;
  if (seed && w.size() >= cfg.detector.refresh_position_min) {
    try {
      m.positions = estimate_positions(a.w1, a.w2, a.a1, a.a2, 1.0 / cfg.sample_rate, h.j1, h.j2, cfg.hinge);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ImplausibleGeometry && e.code() != ErrorCode::SingularSystem) throw;
    }
  }
  out.model = m;
  return out;
}

double main_angle_for_sample(const JointModel& m, const Quat& g1, const Quat& g2, const Quat& c,
                             bool twist_decomposition) {
  const Mat3 B1 = body_frame_from_hinge(m.hinge.j1, m.positions.o1);
  const Mat3 B2 = body_frame_from_hinge(m.hinge.j2, -m.positions.o2);
  const Mat3 R = B1.transpose() * to_matrix(g1).transpose() * to_matrix(c) * to_matrix(g2) * B2;
  const Quat q = from_matrix(R);
  return twist_decomposition ? twist_angle(q, Vec3::UnitX()) : main_axis_angle(q, Vec3::UnitX());
}

SampleAngles angles_for_sample(const JointModel& m, const Quat& g1, const Quat& g2, const Quat& c,
                               bool twist_decomposition) {
  SampleAngles out;
  out.j3 = main_angle_for_sample(m, g1, g2, c, twist_decomposition);

  const Mat3 G1 = to_matrix(g1);
  const Mat3 R2 = to_matrix(c) * to_matrix(g2);
  const Vec3 h_g = G1 * m.hinge.j1;
  Vec3 j3g = (G1 * m.axes.j1).cross(R2 * m.axes.j2);
  j3g = j3g.norm() > 1e-9 ? Vec3(j3g.normalized()) : h_g;
  j3g = aligned(j3g, h_g);
  const Mat3 Q3 = Eigen::AngleAxisd(out.j3, j3g).toRotationMatrix();

  const Mat3 B1 = body_frame_1(m.axes.j1, m.hinge.j1);
  const Mat3 B2 = body_frame_2(m.axes.j2, m.hinge.j2);
  const Mat3 Rt = B1.transpose() * G1.transpose() * Q3.transpose() * R2 * B2;
  const EulerXYZ e = decompose_euler_xyz(from_matrix(Rt));
  out.j1 = e.x;
  out.j2 = e.z;
  out.gimbal_lock = e.gimbal_lock;
  return out;
}

std::string to_string(AngleSource s) {
  return s == AngleSource::NormalInterval ? "NormalInterval" : "DetectionFallback";
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::WindowSolved: return "WindowSolved";
    case EventKind::MovementDetected: return "MovementDetected";
    case EventKind::FallbackEngaged: return "FallbackEngaged";
    case EventKind::WindowRestarted: return "WindowRestarted";
    case EventKind::WindowSkipped: return "WindowSkipped";
    case EventKind::StreamGap: return "StreamGap";
  }
  return "Unknown";
}

PipelineResult process_stream(const ImuStream& s1, const ImuStream& s2, const PipelineConfig& cfg,
                              const OrientationSeries* orientations) {
  PipelineResult res;
  if (s1.empty() && s2.empty()) return res;
  if (s1.size() != s2.size()) throw Error(ErrorCode::ShapeError, "streams differ in length");
  const WindowConfig& wc = cfg.window;
  if (wc.feedback_iters < 1) throw Error(ErrorCode::ConfigError, "feedback_iters must be >= 1");
  if (wc.window_len < 2 || wc.interval_len < 1 || wc.detection_len < 2)
    throw Error(ErrorCode::ConfigError, "window, interval and detection lengths must be positive");
  if (wc.interval_len > wc.interval_cap) throw Error(ErrorCode::ConfigError, "interval length exceeds cap");

  const std::size_t n = s1.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(s1[i].t - s2[i].t) > 0.5 / cfg.sample_rate)
      throw Error(ErrorCode::ShapeError, "streams are not time-aligned at sample " + std::to_string(i));
  }

  std::vector<Quat> q1, q2;
  if (orientations) {
    if (orientations->q1.size() != n || orientations->q2.size() != n)
      throw Error(ErrorCode::ShapeError, "orientation series length mismatch");
    q1 = orientations->q1;
    q2 = orientations->q2;
  } else {
    q1 = batch_estimate(s1, {}, cfg.orientation);
    q2 = batch_estimate(s2, {}, cfg.orientation);
  }
  std::vector<Quat> q_mag(n), q_acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool acc_ok = s1[i].accel.norm() > 0.0 && s2[i].accel.norm() > 0.0;
    const bool mag_ok = s1[i].mag.norm() > 0.0 && s2[i].mag.norm() > 0.0;
    q_acc[i] = acc_ok ? correction_from_pair(q1[i], s1[i].accel, q2[i], s2[i].accel).q : identity();
    q_mag[i] = mag_ok ? correction_from_pair(q1[i], s1[i].mag, q2[i], s2[i].mag).q : identity();
  }

  auto view = [&](std::size_t b, std::size_t e) {
    WindowView v;
    v.s1 = &s1;
    v.s2 = &s2;
    v.q1 = &q1;
    v.q2 = &q2;
    v.q_mag = &q_mag;
    v.q_acc = &q_acc;
    v.begin = b;
    v.end = e;
    return v;
  };

  JointModel model;      // from the latest window solve
  JointModel fallback;   // from detection windows while the restarted window fills
  bool fallback_mode = false;
  std::size_t fallback_begin = 0;
  std::size_t solved_since_reset = 0;
  std::size_t next_solve = wc.window_len;
  std::size_t next_detect = n + 1;
  double prev_j3 = 0.0;
  bool have_prev_j3 = false;
  const std::size_t D = wc.detection_len;

  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && s1[k].t - s1[k - 1].t > cfg.max_gap) {
      res.events.push_back({s1[k].t, EventKind::StreamGap, std::nullopt});
      model = JointModel{};
      fallback_mode = false;
      solved_since_reset = 0;
      next_solve = k + wc.window_len;
      next_detect = n + 1;
      have_prev_j3 = false;
    }

    if (k == next_solve) {
      const WindowView v = view(k - wc.window_len, k);
      const JointModel* prev = fallback_mode ? &fallback : (model.valid ? &model : nullptr);
      try {
        JointModel solved = feedback_iteration(v, cfg, prev);
        model = solved;
        ++solved_since_reset;
        have_prev_j3 = false;
        res.windows.push_back({s1[k - 1].t, v.begin, v.end, solved});
        res.events.push_back({s1[k - 1].t, EventKind::WindowSolved, std::nullopt});
        fallback_mode = false;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::ConfigError) throw;
        res.events.push_back({s1[k - 1].t, EventKind::WindowSkipped, std::nullopt});
      }
      next_solve = k + wc.interval_len;
      next_detect = k + D;
    }

    if (model.valid && cfg.detector.enabled && k == next_detect && k >= D &&
        (fallback_mode || solved_since_reset >= cfg.detector.arm_after_windows)) {
      // while in fallback the detection span grows from the detection point
      const std::size_t b = fallback_mode ? fallback_begin : k - D;
      const DetectionResult det = run_detection_window(view(b, k), cfg, model, fallback_mode ? &fallback : nullptr);
      if (fallback_mode) {
        if (!det.stale) {
          fallback = det.model;
          have_prev_j3 = false;
        }
      } else if (det.stale) {
        res.detections.push_back({s1[k].t, 0.0, true});
      } else {
        const double V = movement_metric(model.axes, det.model.axes, cfg.detector);
        res.detections.push_back({s1[k].t, V, false});
        if (V > cfg.detector.threshold) {
          res.events.push_back({s1[k].t, EventKind::MovementDetected, V});
          res.events.push_back({s1[k].t, EventKind::FallbackEngaged, V});
          res.events.push_back({s1[k].t, EventKind::WindowRestarted, std::nullopt});
          fallback = det.model;
          fallback_mode = true;
          fallback_begin = k;
          // the filters re-converge after a mount change, as at start-up
          solved_since_reset = 0;
          have_prev_j3 = false;
          next_solve = k + wc.window_len;
        }
      }
      next_detect = k + D;
    }

    const JointModel& use = fallback_mode ? fallback : model;
    if (!use.valid) continue;
    const Quat c = cfg.calibrate ? fuse(q_mag[k], q_acc[k], use.refcal.k_mag, use.refcal.k_acc) : identity();
    SampleAngles sa;
    try {
      sa = angles_for_sample(use, q1[k], q2[k], c, cfg.twist_decomposition);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateGeometry) throw;
      continue;
    }
    if (have_prev_j3) {
      while (sa.j3 - prev_j3 > kPi) sa.j3 -= 2.0 * kPi;
      while (sa.j3 - prev_j3 < -kPi) sa.j3 += 2.0 * kPi;
    }
    prev_j3 = sa.j3;
    have_prev_j3 = true;
    JointAngles ja;
    ja.t = s1[k].t;
    ja.index = k;
    ja.angle_j1 = sa.j1;
    ja.angle_j2 = sa.j2;
    ja.angle_j3 = sa.j3;
    ja.source = fallback_mode ? AngleSource::DetectionFallback : AngleSource::NormalInterval;
    res.angles.push_back(ja);
  }
  return res;
}

}  // namespace jointkin
