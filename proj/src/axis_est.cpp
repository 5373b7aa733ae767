#include "jointkin/axis_est.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "jointkin/error.hpp"

namespace jointkin {

namespace {

Eigen::Matrix<double, 3, 2> spherical_jacobian(double inc, double az) {
  Eigen::Matrix<double, 3, 2> d;
  d << std::cos(inc) * std::cos(az), -std::sin(inc) * std::sin(az),
       std::cos(inc) * std::sin(az), std::sin(inc) * std::cos(az),
       -std::sin(inc), 0.0;
  return d;
}

double gyro_rms(const std::vector<Vec3>& w1, const std::vector<Vec3>& w2) {
  double s = 0.0;
  for (std::size_t i = 0; i < w1.size(); ++i) s += w1[i].squaredNorm() + w2[i].squaredNorm();
  return w1.empty() ? 0.0 : std::sqrt(s / (2.0 * static_cast<double>(w1.size())));
}

// Chart centred on an axis: (0, 0) maps to the axis itself, far from the poles.
Vec3 chart_point(const Mat3& frame, double u, double v) {
  return frame * Vec3(std::cos(u) * std::cos(v), std::cos(u) * std::sin(v), std::sin(u));
}

}  // namespace

double hinge_residual(const Vec3& w1, const Vec3& w2, const Vec3& j1, const Vec3& j2) {
  return w1.cross(j1).norm() - w2.cross(j2).norm();
}

HingeEstimate estimate_hinge(const std::vector<Vec3>& w1, const std::vector<Vec3>& w2,
                             const HingeOptions& opts, const HingeEstimate* init,
                             const HingeEstimate* prior, double prior_weight) {
  if (w1.size() != w2.size()) throw Error(ErrorCode::ShapeError, "gyro windows differ in length");
  if (w1.size() < opts.min_samples)
    throw Error(ErrorCode::InsufficientMotion, "hinge window has " + std::to_string(w1.size()) + " samples");
  if (gyro_rms(w1, w2) < opts.min_gyro_rms)
    throw Error(ErrorCode::InsufficientMotion, "gyro RMS below excitation threshold");

  const Eigen::Index n = static_cast<Eigen::Index>(w1.size());
  const bool use_prior = prior != nullptr && prior_weight > 0.0;
  const Eigen::Index rows = n + (use_prior ? 6 : 0);
  const double lam = prior_weight * std::sqrt(static_cast<double>(n));
  ResidualJacobianFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const Vec3 j1 = spherical_to_unit(x[0], x[1]);
    const Vec3 j2 = spherical_to_unit(x[2], x[3]);
    const auto d1 = spherical_jacobian(x[0], x[1]);
    const auto d2 = spherical_jacobian(x[2], x[3]);
    r.resize(rows);
    J.setZero(rows, 4);
    if (use_prior) {
      // The prior is sign-free: compare against whichever sign is closer.
      const Vec3 p1 = prior->j1.dot(j1) < 0.0 ? Vec3(-prior->j1) : prior->j1;
      const Vec3 p2 = prior->j2.dot(j2) < 0.0 ? Vec3(-prior->j2) : prior->j2;
      r.segment<3>(n) = lam * (j1 - p1);
      r.segment<3>(n + 3) = lam * (j2 - p2);
      J.block<3, 2>(n, 0) = lam * d1;
      J.block<3, 2>(n + 3, 2) = lam * d2;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const Vec3& a = w1[static_cast<std::size_t>(k)];
      const Vec3& b = w2[static_cast<std::size_t>(k)];
      const Vec3 c1 = a.cross(j1);
      const Vec3 c2 = b.cross(j2);
      const double n1 = c1.norm();
      const double n2 = c2.norm();
      r[k] = n1 - n2;
      const Vec3 g1 = n1 > 1e-12 ? Vec3(c1.cross(a) / n1) : Vec3::Zero();
      const Vec3 g2 = n2 > 1e-12 ? Vec3(c2.cross(b) / n2) : Vec3::Zero();
      J.block<1, 2>(k, 0) = g1.transpose() * d1;
      J.block<1, 2>(k, 2) = -g2.transpose() * d2;
    }
  };

  std::vector<Eigen::Vector4d> starts;
  if (init) {
    Eigen::Vector4d x0;
    unit_to_spherical(init->j1, x0[0], x0[1]);
    unit_to_spherical(init->j2, x0[2], x0[3]);
    // Keep away from the poles where the azimuth drops out.
    if (std::sin(x0[0]) >= 1e-3 && std::sin(x0[2]) >= 1e-3) starts.push_back(x0);
  }
  if (starts.empty() || opts.multi_start) starts.push_back(Eigen::Vector4d(kPi / 4, kPi / 4, kPi / 4, kPi / 4));
  if (opts.multi_start) {
    for (const Eigen::Vector2d& a : {Eigen::Vector2d(kPi / 2, 0.0), Eigen::Vector2d(kPi / 2, kPi / 2),
                                     Eigen::Vector2d(3 * kPi / 4, kPi / 4)})
      starts.push_back(Eigen::Vector4d(a[0], a[1], a[0], a[1]));
  }
  SolveResult sr;
  bool have = false;
  std::optional<Error> last_error;
  for (const Eigen::Vector4d& x0 : starts) {
    try {
      SolveResult r = gauss_newton(f, Eigen::VectorXd(x0), opts.solver);
      if (!have || r.cost < sr.cost) {
        sr = std::move(r);
        have = true;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularSystem) throw;
      last_error = e;
    }
  }
  if (!have) throw *last_error;

  HingeEstimate out;
  out.j1 = sign_canonical(spherical_to_unit(sr.x[0], sr.x[1]));
  out.j2 = sign_canonical(spherical_to_unit(sr.x[2], sr.x[3]));
  unit_to_spherical(out.j1, out.sph1[0], out.sph1[1]);
  unit_to_spherical(out.j2, out.sph2[0], out.sph2[1]);
  double ss = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double e = hinge_residual(w1[static_cast<std::size_t>(k)], w2[static_cast<std::size_t>(k)], out.j1, out.j2);
    ss += e * e;
  }
  out.residual_rms = std::sqrt(ss / static_cast<double>(n));
  out.converged = sr.converged;
  return out;
}

Vec3 compensated_accel(const Vec3& a, const Vec3& w, const Vec3& dw, const Vec3& o) {
  return a - dw.cross(o) - w.cross(w.cross(o));
}

double position_residual(const PositionSample& s, const Vec3& o1, const Vec3& o2) {
  return compensated_accel(s.a1, s.w1, s.dw1, o1).norm() - compensated_accel(s.a2, s.w2, s.dw2, o2).norm();
}

std::vector<Vec3> differentiate(const std::vector<Vec3>& w, double dt) {
  std::vector<Vec3> d(w.size(), Vec3::Zero());
  const std::size_t n = w.size();
  if (n < 2) return d;
  d[0] = (w[1] - w[0]) / dt;
  d[n - 1] = (w[n - 1] - w[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (w[i + 1] - w[i - 1]) / (2.0 * dt);
  return d;
}

JointPositionEstimate estimate_positions(const std::vector<Vec3>& w1, const std::vector<Vec3>& w2,
                                         const std::vector<Vec3>& a1, const std::vector<Vec3>& a2,
                                         double dt, const Vec3& j1, const Vec3& j2,
                                         const HingeOptions& opts) {
  const std::size_t n = w1.size();
  if (w2.size() != n || a1.size() != n || a2.size() != n)
    throw Error(ErrorCode::ShapeError, "position window channels differ in length");
  if (n < opts.min_samples)
    throw Error(ErrorCode::InsufficientMotion, "position window has " + std::to_string(n) + " samples");
  if (gyro_rms(w1, w2) < opts.min_gyro_rms)
    throw Error(ErrorCode::InsufficientMotion, "gyro RMS below excitation threshold");

  const std::vector<Vec3> dw1 = differentiate(w1, dt);
  const std::vector<Vec3> dw2 = differentiate(w2, dt);
  std::vector<Mat3> K1(n), K2(n);
  for (std::size_t k = 0; k < n; ++k) {
    K1[k] = skew(dw1[k]) + skew(w1[k]) * skew(w1[k]);
    K2[k] = skew(dw2[k]) + skew(w2[k]) * skew(w2[k]);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(n);
  const double anchor = opts.position_anchor_weight * std::sqrt(static_cast<double>(n));
  ResidualJacobianFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    const Vec3 o1 = x.head<3>();
    const Vec3 o2 = x.tail<3>();
    r.resize(m + 1);
    J.resize(m + 1, 6);
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3 e1 = a1[k] - K1[k] * o1;
      const Vec3 e2 = a2[k] - K2[k] * o2;
      const double n1 = e1.norm();
      const double n2 = e2.norm();
      const Eigen::Index row = static_cast<Eigen::Index>(k);
      r[row] = n1 - n2;
      J.block<1, 3>(row, 0) = n1 > 1e-12 ? Eigen::RowVector3d(-(K1[k].transpose() * e1 / n1).transpose())
                                         : Eigen::RowVector3d::Zero();
      J.block<1, 3>(row, 3) = n2 > 1e-12 ? Eigen::RowVector3d((K2[k].transpose() * e2 / n2).transpose())
                                         : Eigen::RowVector3d::Zero();
    }
    r[m] = anchor * (o1.dot(j1) + o2.dot(j2));
    J.block<1, 3>(m, 0) = anchor * j1.transpose();
    J.block<1, 3>(m, 3) = anchor * j2.transpose();
  };
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
  const SolveResult sr = gauss_newton(f, x0, opts.solver);

  JointPositionEstimate out;
  Vec3 o1 = sr.x.head<3>();
  Vec3 o2 = sr.x.tail<3>();
  const double shift = 0.5 * (o1.dot(j1) + o2.dot(j2));
  o1 -= shift * j1;
  o2 -= shift * j2;
  out.o1 = o1;
  out.o2 = o2;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = (a1[k] - K1[k] * o1).norm() - (a2[k] - K2[k] * o2).norm();
    s += e * e;
  }
  out.residual_rms = std::sqrt(s / static_cast<double>(n));
  out.converged = sr.converged;
  if (!(o1.norm() < opts.max_position_norm) || !(o2.norm() < opts.max_position_norm))
    throw Error(ErrorCode::ImplausibleGeometry, "joint position vector exceeds sanity bound");
  return out;
}

double threedof_rate(const Vec3& w1_g, const Vec3& w2_g, const Vec3& j3_g) { return (w2_g - w1_g).dot(j3_g); }

double threedof_residual(const ThreeDofSample& s, const Vec3& j1, const Vec3& j2) {
  const Vec3 c = (s.r1 * j1).cross(s.r2 * j2);
  if (c.norm() < 1e-9) throw Error(ErrorCode::DegenerateAxisPair, "secondary axes are parallel");
  const Vec3 dw = s.r2 * s.w2 - s.r1 * s.w1;
  return dw.dot(c) - dw.dot(s.j3_g) * s.j3_g.dot(c);
}

double secondary_excitation(const std::vector<ThreeDofSample>& samples) {
  if (samples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : samples) {
    const Vec3 dw = x.r2 * x.w2 - x.r1 * x.w1;
    s += (dw - dw.dot(x.j3_g) * x.j3_g).squaredNorm();
  }
  return std::sqrt(s / static_cast<double>(samples.size()));
}

ThreeDofAxes estimate_secondary_axes(const std::vector<ThreeDofSample>& samples, const Vec3& j3_s1,
                                     const Vec3& j3_s2, const Vec3& prior_j1, const Vec3& prior_j2,
                                     const SecondaryOptions& opts) {
  if (samples.empty()) throw Error(ErrorCode::EmptyWindow, "no samples for secondary axes");
  if (secondary_excitation(samples) < opts.min_rate_rms)
    throw Error(ErrorCode::InsufficientMotion, "secondary degrees of freedom not excited");

  const Mat3 f1 = frame_with_x(prior_j1);
  const Mat3 f2 = frame_with_x(prior_j2);
  const Vec3 p1 = prior_j1.normalized();
  const Vec3 p2 = prior_j2.normalized();
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  const double lam = opts.prior_weight * std::sqrt(static_cast<double>(n));

  ResidualFn f = [&](const Eigen::VectorXd& x) {
    const Vec3 j1 = chart_point(f1, x[0], x[1]);
    const Vec3 j2 = chart_point(f2, x[2], x[3]);
    Eigen::VectorXd r(n + 6);
    for (Eigen::Index k = 0; k < n; ++k) r[k] = threedof_residual(samples[static_cast<std::size_t>(k)], j1, j2);
    r.segment<3>(n) = lam * (j1 - p1);
    r.segment<3>(n + 3) = lam * (j2 - p2);
    return r;
  };
  const SolveResult sr = secant_lm(f, Eigen::VectorXd::Zero(4), opts.solver);

  ThreeDofAxes out;
  out.j1 = sign_canonical(chart_point(f1, sr.x[0], sr.x[1]));
  out.j2 = sign_canonical(chart_point(f2, sr.x[2], sr.x[3]));
  out.j3_s1 = j3_s1;
  out.j3_s2 = j3_s2;
  out.converged = sr.converged;
  return out;
}

}  // namespace jointkin
