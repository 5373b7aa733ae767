#include "jointkin/gimbal_sim.hpp"

#include <cmath>
#include <random>

#include "jointkin/error.hpp"

namespace jointkin {

namespace {

// One factor of a rotation chain: either a constant rotation or an
// elementary rotation about a fixed local axis.
struct Factor {
  Mat3 constant = Mat3::Identity();
  Vec3 axis = Vec3::Zero();
  double a = 0.0, da = 0.0, dda = 0.0;
  bool elementary = false;
};

struct ChainState {
  Mat3 R;
  Vec3 w;   // body rate
  Vec3 dw;  // its derivative, body coordinates
};

// R = F_0 F_1 ... F_n. Walking from the end, the partial product P has body
// rate w_P; a factor with local axis a contributes u = P^T a to the rate and
// u'' = -w_P x u to its derivative.
ChainState evaluate_chain(const std::vector<Factor>& chain) {
  Mat3 P = Mat3::Identity();
  Vec3 w = Vec3::Zero();
  Vec3 dw = Vec3::Zero();
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    if (!it->elementary) {
      P = it->constant * P;
      continue;
    }
    const Vec3 u = P.transpose() * it->axis;
    dw += u * it->dda - w.cross(u * it->da);
    w += u * it->da;
    P = Eigen::AngleAxisd(it->a, it->axis).toRotationMatrix() * P;
  }
  return {P, w, dw};
}

void envelope(const TrajectorySpec& tr, double t, double& e, double& de, double& dde) {
  if (tr.still_time <= 0.0) {
    e = 1.0;
    de = dde = 0.0;
    return;
  }
  const double T = std::max(tr.ramp_time, 1e-6);
  const double x = (t - tr.still_time) / T;
  if (x <= 0.0) {
    e = de = dde = 0.0;
  } else if (x >= 1.0) {
    e = 1.0;
    de = dde = 0.0;
  } else {
    e = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    de = 30.0 * x * x * (1.0 - x) * (1.0 - x) / T;
    dde = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x) / (T * T);
  }
}

Factor elementary(const Vec3& axis, const AngleFunction& f, const TrajectorySpec& tr, double t) {
  double v, dv, ddv, e, de, dde;
  evaluate(f, t, v, dv, ddv);
  envelope(tr, t, e, de, dde);
  Factor fa;
  fa.elementary = true;
  fa.axis = axis.normalized();
  fa.a = e * v;
  fa.da = de * v + e * dv;
  fa.dda = dde * v + 2.0 * de * dv + e * ddv;
  return fa;
}

Factor constant(const Quat& q) {
  Factor f;
  f.constant = to_matrix(q);
  return f;
}

Quat offset_at(const GimbalSpec& g, double t, double duration) {
  if (!g.time_varying_offset || duration <= 0.0) return canonical(g.ref_offset);
  return canonical(g.ref_offset.slerp(std::clamp(t / duration, 0.0, 1.0), g.ref_offset_end));
}

}  // namespace

void evaluate(const AngleFunction& f, double t, double& v, double& dv, double& ddv) {
  v = dv = ddv = 0.0;
  for (const auto& s : f) {
    const double om = 2.0 * kPi * s.frequency;
    const double arg = om * t + s.phase;
    v += s.amplitude * std::sin(arg);
    dv += s.amplitude * om * std::cos(arg);
    ddv -= s.amplitude * om * om * std::sin(arg);
  }
}

SimulationResult simulate(const GimbalSpec& spec, const TrajectorySpec& traj, const NoiseSpec& noise) {
  SimulationResult out;
  GroundTruth& gt = out.truth;
  const std::size_t n = static_cast<std::size_t>(std::floor(traj.duration * traj.sample_rate + 1e-9));
  const double dt = 1.0 / traj.sample_rate;

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gauss3 = [&](double s) {
    if (s <= 0.0) return Vec3(Vec3::Zero());
    const double x = normal(rng), y = normal(rng), z = normal(rng);
    return Vec3(s * x, s * y, s * z);
  };

  const Mat3 M1 = to_matrix(spec.mount1);
  const Mat3 M2 = to_matrix(spec.mount2);
  gt.j1 = M1.transpose() * spec.axis1.normalized();
  gt.j2 = M2.transpose() * spec.axis2.normalized();
  gt.h1 = M1.transpose() * spec.axis3.normalized();
  gt.h2 = M2.transpose() * spec.axis3.normalized();
  gt.o1 = M1.transpose() * spec.p1;
  gt.o2 = M2.transpose() * spec.p2;

  const Vec3 g_world(0.0, 0.0, -kGravity);
  const Vec3 m_world = Vec3(std::cos(spec.mag_dip), 0.0, -std::sin(spec.mag_dip));

  out.stream1.reserve(n);
  out.stream2.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    std::vector<Factor> base = {constant(spec.base), elementary(Vec3::UnitZ(), traj.base_yaw, traj, t),
                                elementary(Vec3::UnitY(), traj.base_pitch, traj, t),
                                elementary(Vec3::UnitX(), traj.base_roll, traj, t)};
    std::vector<Factor> c1 = base;
    c1.push_back(constant(spec.mount1));
    std::vector<Factor> c2 = base;
    const Factor f1 = elementary(spec.axis1, traj.theta1, traj, t);
    const Factor f3 = elementary(spec.axis3, traj.theta3, traj, t);
    const Factor f2 = elementary(spec.axis2, traj.theta2, traj, t);
    c2.push_back(f1);
    c2.push_back(f3);
    c2.push_back(f2);
    c2.push_back(constant(spec.mount2));
    const ChainState s1 = evaluate_chain(c1);
    const ChainState s2 = evaluate_chain(c2);

    Vec3 cacc = Vec3::Zero();
    for (int ax = 0; ax < 3; ++ax) {
      double v, dv, ddv, e, de, dde;
      evaluate(traj.centre[static_cast<std::size_t>(ax)], t, v, dv, ddv);
      envelope(traj, t, e, de, dde);
      cacc[ax] = dde * v + 2.0 * de * dv + e * ddv;
    }
    const Vec3 lin = cacc - g_world;
    const Quat C = offset_at(spec, t, traj.duration);
    const Vec3 m2_world = spec.realistic_offset ? Vec3(rotate(C, m_world)) : m_world;

    auto lever = [](const ChainState& s, const Vec3& o) { return Vec3(s.dw.cross(o) + s.w.cross(s.w.cross(o))); };

    ImuSample a, b;
    a.t = b.t = t;
    a.gyro = s1.w + noise.gyro_bias + gauss3(noise.gyro_noise);
    a.accel = s1.R.transpose() * lin + lever(s1, gt.o1) + noise.accel_bias + gauss3(noise.accel_noise);
    a.mag = s1.R.transpose() * m_world + noise.mag_bias + gauss3(noise.mag_noise);
    b.gyro = s2.w + noise.gyro_bias + gauss3(noise.gyro_noise);
    b.accel = s2.R.transpose() * lin + lever(s2, gt.o2) + noise.accel_bias + gauss3(noise.accel_noise);
    b.mag = s2.R.transpose() * m2_world + noise.mag_bias + gauss3(noise.mag_noise);
    out.stream1.push_back(a);
    out.stream2.push_back(b);

    const Quat q1 = from_matrix(s1.R);
    const Quat q2 = from_matrix(s2.R);
    gt.t.push_back(t);
    gt.angles.emplace_back(f1.a, f2.a, f3.a);
    gt.world1.push_back(q1);
    gt.world2.push_back(q2);
    gt.ref1.push_back(q1);
    gt.ref2.push_back(compose(conj(C), q2));
    gt.ref_offset.push_back(C);
    gt.w1.push_back(s1.w);
    gt.w2.push_back(s2.w);
    gt.dw1.push_back(s1.dw);
    gt.dw2.push_back(s2.dw);
  }
  return out;
}

ImuStream apply_event(const ImuStream& stream, const SensorMovementEvent& event) {
  if (stream.empty() || event.t < stream.front().t || event.t > stream.back().t)
    throw Error(ErrorCode::EventOutOfRange, "movement event outside stream span");
  ImuStream out = stream;
  const Mat3 Et = to_matrix(event.rotation).transpose();
  for (auto& s : out) {
    if (s.t < event.t) continue;
    s.gyro = Et * s.gyro;
    s.accel = Et * s.accel;
    s.mag = Et * s.mag;
  }
  return out;
}

void apply_event(std::vector<Quat>& orientation, const std::vector<double>& t, const SensorMovementEvent& event) {
  if (t.empty() || event.t < t.front() || event.t > t.back())
    throw Error(ErrorCode::EventOutOfRange, "movement event outside stream span");
  for (std::size_t i = 0; i < orientation.size() && i < t.size(); ++i)
    if (t[i] >= event.t) orientation[i] = compose(orientation[i], event.rotation);
}

NoiseSpec default_noise(std::uint64_t seed) {
  NoiseSpec n;
  n.gyro_noise = 0.005;
  n.accel_noise = 0.05;
  n.mag_noise = 0.01;
  n.seed = seed;
  return n;
}

}  // namespace jointkin

namespace jointkin {

namespace {

AngleFunction two_tone(double amp, double f, double ph1, double ph2) {
  return {{amp, f, ph1}, {0.4 * amp, 2.3 * f, ph2}};
}

}  // namespace

Scenario make_scenario(const std::string& name, std::uint64_t seed, double duration) {
  Scenario s;
  s.noise = default_noise(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  auto ph = [&] { return phase(rng); };

  GimbalSpec& g = s.gimbal;
  // Segment 1 tilted so that gravity projects onto all three gimbal axes.
  g.base = canonical(Quat::FromTwoVectors(Vec3(0.7, 0.1, 0.7).normalized(), Vec3::UnitZ()));
  // Sensors strapped roughly along the gimbal axes. The tilt about the main
  // axis is kept small since nothing in the data resolves it.
  g.mount1 = canonical(rot_x(rad(3.0)) * rot_y(rad(-1.0)) * rot_z(rad(4.0)));
  g.mount2 = canonical(rot_x(rad(-3.0)) * rot_y(rad(1.0)) * rot_z(rad(-3.0)));

  TrajectorySpec& tr = s.trajectory;
  tr.duration = duration;
  tr.sample_rate = 100.0;
  tr.base_yaw = two_tone(rad(30.0), 0.4, ph(), ph());
  tr.base_pitch = two_tone(rad(30.0), 0.62, ph(), ph());
  tr.base_roll = two_tone(rad(30.0), 0.86, ph(), ph());
  for (auto& c : tr.centre) c = {{0.03, 0.7, ph()}};

  if (name == "hinge") {
    tr.theta3 = two_tone(rad(40.0), 0.5, ph(), ph());
  } else if (name == "gimbal") {
    tr.theta3 = two_tone(rad(40.0), 0.5, ph(), ph());
    tr.theta1 = two_tone(rad(3.0), 0.37, ph(), ph());
    tr.theta2 = two_tone(rad(3.0), 0.29, ph(), ph());
  } else if (name == "walking") {
    tr.theta3 = two_tone(rad(30.0), 0.9, ph(), ph());
    tr.theta1 = two_tone(rad(2.0), 0.45, ph(), ph());
    tr.theta2 = two_tone(rad(2.0), 0.33, ph(), ph());
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
  }
  return s;
}

}  // namespace jointkin
