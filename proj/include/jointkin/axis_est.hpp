#pragma once

#include <vector>

#include "jointkin/math.hpp"
#include "jointkin/solver.hpp"

namespace jointkin {

struct HingeEstimate {
  Vec3 j1 = Vec3::UnitX();  // main axis in [s1]
  Vec3 j2 = Vec3::UnitX();  // main axis in [s2]
  double sph1[2] = {kPi / 4, kPi / 4};  // (inclination, azimuth)
  double sph2[2] = {kPi / 4, kPi / 4};
  double residual_rms = 0.0;  // rad/s
  bool converged = false;
};

struct JointPositionEstimate {
  Vec3 o1 = Vec3::Zero();  // joint centre -> sensor 1, in [s1]
  Vec3 o2 = Vec3::Zero();  // joint centre -> sensor 2, in [s2]
  double residual_rms = 0.0;  // m/s^2
  bool converged = false;
};

// Secondary 3-DoF axes. j3 is the main axis carried over from the hinge
// estimate, kept in both sensor frames since its reference-frame image
// changes per sample.
struct ThreeDofAxes {
  Vec3 j1 = Vec3::UnitX();  // [s1]
  Vec3 j2 = Vec3::UnitZ();  // [s2]
  Vec3 j3_s1 = Vec3::UnitY();
  Vec3 j3_s2 = Vec3::UnitY();
  bool converged = false;
};

struct HingeOptions {
  SolverOptions solver{.max_iter = 60, .damping_init = 1e-3, .tol_step = 1e-10, .tol_grad = 1e-12,
                       .finite_diff_h = 1e-6, .jacobian_refresh = 10};
  std::size_t min_samples = 50;
  double min_gyro_rms = 0.3;  // rad/s
  // extra fixed starting points tried besides `init`; the lowest cost wins
  bool multi_start = true;
  double max_position_norm = 2.0;  // m
  double position_anchor_weight = 1.0;
};

struct SecondaryOptions {
  SolverOptions solver{.max_iter = 80, .damping_init = 1e-3, .tol_step = 1e-10, .tol_grad = 1e-12,
                       .finite_diff_h = 1e-6, .jacobian_refresh = 10};
  double min_rate_rms = 0.05;  // rad/s, relative rate orthogonal to j3
  double prior_weight = 0.05;  // rad/s per unit axis deviation
};

double hinge_residual(const Vec3& w1, const Vec3& w2, const Vec3& j1, const Vec3& j2);

// Gauss-Newton on spherical coordinates of both axes. `init` seeds the
// solve; otherwise both axes start at (pi/4, pi/4). With `prior`, rows
// prior_weight * sqrt(N) * (j - j_prior) are appended. Throws
// InsufficientMotion, SingularSystem.
HingeEstimate estimate_hinge(const std::vector<Vec3>& w1, const std::vector<Vec3>& w2,
                             const HingeOptions& opts = {}, const HingeEstimate* init = nullptr,
                             const HingeEstimate* prior = nullptr, double prior_weight = 0.0);

// a - dw x o - w x (w x o)
Vec3 compensated_accel(const Vec3& a, const Vec3& w, const Vec3& dw, const Vec3& o);

struct PositionSample {
  Vec3 w1, w2, dw1, dw2, a1, a2;
};

double position_residual(const PositionSample& s, const Vec3& o1, const Vec3& o2);

// Central differences inside, one-sided at the ends.
std::vector<Vec3> differentiate(const std::vector<Vec3>& w, double dt);

// Gauss-Newton on (o1, o2). The component along the hinge axes is not
// observable for a pure hinge; it is pinned by a weak anchor row and then
// shifted so that o1.j1 + o2.j2 = 0. Throws InsufficientMotion,
// SingularSystem, ImplausibleGeometry.
JointPositionEstimate estimate_positions(const std::vector<Vec3>& w1, const std::vector<Vec3>& w2,
                                         const std::vector<Vec3>& a1, const std::vector<Vec3>& a2,
                                         double dt, const Vec3& j1, const Vec3& j2,
                                         const HingeOptions& opts = {});

// (w2_g - w1_g) . j3_g
double threedof_rate(const Vec3& w1_g, const Vec3& w2_g, const Vec3& j3_g);

// One sample of the 3-DoF constraint. r1 maps [s1] to [g1]; r2 maps [s2] to
// [g1] (reference correction already applied).
struct ThreeDofSample {
  Mat3 r1 = Mat3::Identity();
  Mat3 r2 = Mat3::Identity();
  Vec3 w1 = Vec3::Zero();
  Vec3 w2 = Vec3::Zero();
  Vec3 j3_g = Vec3::UnitY();
};

// (w2_g - w1_g) . c - w_j3 (j3_g . c), c = j1_g x j2_g. Throws DegenerateAxisPair.
double threedof_residual(const ThreeDofSample& s, const Vec3& j1, const Vec3& j2);

// Secant LM over a spherical chart centred on the prior axes, with a
// Tikhonov pull toward the priors. Throws InsufficientMotion.
ThreeDofAxes estimate_secondary_axes(const std::vector<ThreeDofSample>& samples, const Vec3& j3_s1,
                                     const Vec3& j3_s2, const Vec3& prior_j1, const Vec3& prior_j2,
                                     const SecondaryOptions& opts = {});

// Root mean square of the relative rate orthogonal to j3.
double secondary_excitation(const std::vector<ThreeDofSample>& samples);

}  // namespace jointkin
