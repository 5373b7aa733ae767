#pragma once

#include <random>
#include <vector>

#include "jointkin/gimbal_sim.hpp"
#include "jointkin/math.hpp"
#include "jointkin/pipeline.hpp"
#include "jointkin/refcal.hpp"

namespace test {

using namespace jointkin;

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return canonical(Quat(n(rng), n(rng), n(rng), n(rng)));
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline Vec3 aligned(const Vec3& v, const Vec3& ref) { return v.dot(ref) < 0.0 ? Vec3(-v) : v; }

inline double axis_error_deg(const Vec3& est, const Vec3& truth) {
  return deg(angle_between(aligned(est, truth), truth));
}

inline Scenario clean_scenario(const std::string& name, double duration, std::uint64_t seed = 1) {
  Scenario sc = make_scenario(name, seed, duration);
  sc.noise = NoiseSpec{};
  sc.noise.seed = seed;
  return sc;
}

// Oracle orientations and reference-frame corrections for a window solve.
struct OracleWindow {
  std::vector<Quat> q_mag, q_acc;
  WindowView view;
};

inline OracleWindow oracle_window(const SimulationResult& sim, std::size_t b, std::size_t e) {
  OracleWindow o;
  const GroundTruth& gt = sim.truth;
  o.q_mag.assign(sim.stream1.size(), identity());
  o.q_acc.assign(sim.stream1.size(), identity());
  // the true offset itself: accel pairs carry lever-arm terms even when clean
  for (std::size_t i = b; i < e; ++i) o.q_acc[i] = o.q_mag[i] = gt.ref_offset[i];
  o.view.s1 = &sim.stream1;
  o.view.s2 = &sim.stream2;
  o.view.q1 = &gt.ref1;
  o.view.q2 = &gt.ref2;
  o.view.begin = b;
  o.view.end = e;
  return o;
}

// WindowView points into the vectors, so bind them after the struct settles.
inline void bind(OracleWindow& o) {
  o.view.q_mag = &o.q_mag;
  o.view.q_acc = &o.q_acc;
}

inline JointModel truth_model(const GroundTruth& gt) {
  JointModel m;
  m.hinge.j1 = gt.h1;
  m.hinge.j2 = gt.h2;
  m.positions.o1 = gt.o1;
  m.positions.o2 = gt.o2;
  m.axes.j1 = gt.j1;
  m.axes.j2 = gt.j2;
  m.axes.j3_s1 = gt.h1;
  m.axes.j3_s2 = gt.h2;
  m.anchor_j1 = gt.j1;
  m.anchor_j2 = gt.j2;
  m.anchor_h1 = gt.h1;
  m.secondary_valid = true;
  m.valid = true;
  return m;
}

}  // namespace test
