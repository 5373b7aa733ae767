#pragma once

#include <vector>

#include "jointkin/imu.hpp"
#include "jointkin/math.hpp"
#include "jointkin/solver.hpp"

namespace jointkin {

struct PairCorrection {
  Quat q = Quat(1.0, 0.0, 0.0, 0.0);
  bool parallel = false;      // vectors already aligned, identity returned
  bool antiparallel = false;  // axis undefined, identity returned
};

// Rotation taking rotate(q2, v2) onto rotate(q1, v1). Throws InvalidArgument
// for a zero vector.
PairCorrection correction_from_pair(const Quat& q1, const Vec3& v1, const Quat& q2, const Vec3& v2);

// normalize(k_mag * q_mag + k_acc * q_acc) after flipping q_acc onto the
// same hemisphere. Throws InvalidArgument for negative weights and
// DegenerateFusion when the sum vanishes.
Quat fuse(const Quat& q_mag, const Quat& q_acc, double k_mag, double k_acc);

struct ReferenceFrameCorrection {
  Quat q_corr = Quat(1.0, 0.0, 0.0, 0.0);  // [g2] -> [g1]
  double k_mag = 0.5;
  double k_acc = 0.5;
};

// Everything the coefficient cost needs for one window.
struct CalibrationWindow {
  std::vector<Quat> q1, q2;       // sensor -> own reference
  std::vector<Quat> q_mag, q_acc; // per-sample corrections
  Vec3 j1 = Vec3::UnitX();        // hinge axis in [s1]
  Vec3 j2 = Vec3::UnitX();        // hinge axis in [s2]
};

// Fills q_mag / q_acc from the two streams. Degenerate pairs fall back to identity.
CalibrationWindow make_calibration_window(const std::vector<Quat>& q1, const std::vector<Quat>& q2,
                                          const ImuStream& s1, const ImuStream& s2, std::size_t begin,
                                          std::size_t end);

// Mean over the window of |q1 j1 - (q_corr q2) j2|. Throws EmptyWindow.
double coefficient_cost(double k_mag, double k_acc, const CalibrationWindow& w);

struct CoefficientResult {
  double k_mag = 0.5;
  double k_acc = 0.5;
  double cost = 0.0;
  double initial_cost = 0.0;
  bool converged = false;
};

// Secant LM over (k_mag, k_acc), clamped to >= 0. Never returns a cost above
// the initial one.
CoefficientResult optimize_coefficients(const CalibrationWindow& w, double k_mag0 = 0.5,
                                        double k_acc0 = 0.5, const SolverOptions& opts = {});

}  // namespace jointkin
