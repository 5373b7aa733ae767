#include "jointkin/refcal.hpp"

#include <algorithm>
#include <cmath>

#include "jointkin/error.hpp"

namespace jointkin {

PairCorrection correction_from_pair(const Quat& q1, const Vec3& v1, const Quat& q2, const Vec3& v2) {
  if (!(v1.norm() > 0.0) || !(v2.norm() > 0.0))
    throw Error(ErrorCode::InvalidArgument, "correction_from_pair needs nonzero vectors");
  const Vec3 u1 = rotate(q1, v1).normalized();
  const Vec3 u2 = rotate(q2, v2).normalized();
  const Vec3 w = u2.cross(u1);
  const double s = w.norm();
  const double c = u2.dot(u1);
  PairCorrection out;
  if (s < 1e-12) {
    if (c > 0.0)
      out.parallel = true;
    else
      out.antiparallel = true;
    return out;
  }
  out.q = from_axis_angle(w / s, std::atan2(s, c));
  return out;
}

Quat fuse(const Quat& q_mag, const Quat& q_acc, double k_mag, double k_acc) {
  if (k_mag < 0.0 || k_acc < 0.0) throw Error(ErrorCode::InvalidArgument, "fusion weights must be >= 0");
  Eigen::Vector4d a = q_mag.coeffs();
  Eigen::Vector4d b = q_acc.coeffs();
  if (a.dot(b) < 0.0) b = -b;
  const Eigen::Vector4d s = k_mag * a + k_acc * b;
  const double n = s.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::DegenerateFusion, "weighted quaternion sum vanished");
  Quat q;
  q.coeffs() = s / n;
  return canonical(q);
}

CalibrationWindow make_calibration_window(const std::vector<Quat>& q1, const std::vector<Quat>& q2,
                                          const ImuStream& s1, const ImuStream& s2, std::size_t begin,
                                          std::size_t end) {
  CalibrationWindow w;
  const std::size_t n = end - begin;
  w.q1.reserve(n);
  w.q2.reserve(n);
  w.q_mag.reserve(n);
  w.q_acc.reserve(n);
  for (std::size_t i = begin; i < end; ++i) {
    w.q1.push_back(q1[i]);
    w.q2.push_back(q2[i]);
    const auto& a = s1[i];
    const auto& b = s2[i];
    const bool acc_ok = a.accel.norm() > 0.0 && b.accel.norm() > 0.0;
    const bool mag_ok = a.mag.norm() > 0.0 && b.mag.norm() > 0.0;
    w.q_acc.push_back(acc_ok ? correction_from_pair(q1[i], a.accel, q2[i], b.accel).q : identity());
    w.q_mag.push_back(mag_ok ? correction_from_pair(q1[i], a.mag, q2[i], b.mag).q : identity());
  }
  return w;
}

namespace {

// Per-sample deviation norms; the cost is their mean.
void deviations(double k_mag, double k_acc, const CalibrationWindow& w, Eigen::VectorXd& d) {
  const std::size_t n = w.q1.size();
  d.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Quat qc = fuse(w.q_mag[i], w.q_acc[i], k_mag, k_acc);
    const Vec3 a = rotate(w.q1[i], w.j1);
    const Vec3 b = rotate(qc, rotate(w.q2[i], w.j2));
    d[static_cast<Eigen::Index>(i)] = (a - b).norm();
  }
}

}  // namespace

double coefficient_cost(double k_mag, double k_acc, const CalibrationWindow& w) {
  if (w.q1.empty()) throw Error(ErrorCode::EmptyWindow, "calibration window is empty");
  Eigen::VectorXd d;
  deviations(k_mag, k_acc, w, d);
  return d.mean();
}

CoefficientResult optimize_coefficients(const CalibrationWindow& w, double k_mag0, double k_acc0,
                                        const SolverOptions& opts) {
  if (w.q1.empty()) throw Error(ErrorCode::EmptyWindow, "calibration window is empty");
  static constexpr double kFloor = 1e-9;
  auto project = [](Eigen::VectorXd& x) {
    x = x.cwiseMax(0.0);
    if (x.sum() < kFloor) x.setConstant(kFloor);
  };
  // sqrt of each deviation, so half the squared residual norm is N/2 times the cost.
  ResidualFn f = [&w](const Eigen::VectorXd& x) {
    Eigen::VectorXd d;
    deviations(std::max(x[0], 0.0), std::max(x[1], 0.0), w, d);
    return Eigen::VectorXd(d.cwiseSqrt());
  };
  Eigen::VectorXd x0(2);
  x0 << k_mag0, k_acc0;
  project(x0);

  CoefficientResult out;
  out.initial_cost = coefficient_cost(x0[0], x0[1], w);
  const SolveResult r = secant_lm(f, x0, opts, project);
  const double c = coefficient_cost(r.x[0], r.x[1], w);
  if (c <= out.initial_cost) {
    out.k_mag = r.x[0];
    out.k_acc = r.x[1];
    out.cost = c;
  } else {
    out.k_mag = x0[0];
    out.k_acc = x0[1];
    out.cost = out.initial_cost;
  }
  out.converged = r.converged;
  return out;
}

}  // namespace jointkin
