#include "jointkin/math.hpp"

#include <algorithm>
#include <cmath>

#include "jointkin/error.hpp"

namespace jointkin {

Quat identity() { return Quat(1.0, 0.0, 0.0, 0.0); }

Quat canonical(const Quat& q) {
  Quat r = q.normalized();
  if (r.w() < 0.0) r.coeffs() = -r.coeffs();
  return r;
}

Quat conj(const Quat& q) { return q.conjugate(); }

Quat compose(const Quat& q1, const Quat& q2) { return canonical(q1 * q2); }

Vec3 rotate(const Quat& q, const Vec3& v) { return q._transformVector(v); }

Quat from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::DegenerateAxis, "rotation axis has zero norm");
  const Vec3 u = axis / n;
  const double s = std::sin(0.5 * angle);
  return canonical(Quat(std::cos(0.5 * angle), s * u.x(), s * u.y(), s * u.z()));
}

Quat from_rotvec(const Vec3& rv) {
  const double a = rv.norm();
  if (a < 1e-300) return identity();
  const double s = std::sin(0.5 * a) / a;
  return Quat(std::cos(0.5 * a), s * rv.x(), s * rv.y(), s * rv.z()).normalized();
}

Mat3 to_matrix(const Quat& q) { return q.normalized().toRotationMatrix(); }

Quat from_matrix(const Mat3& R) { return canonical(Quat(R)); }

double rotation_angle(const Quat& q) {
  const Quat c = canonical(q);
  return 2.0 * std::atan2(c.vec().norm(), c.w());
}

Quat rot_x(double a) { return Quat(std::cos(0.5 * a), std::sin(0.5 * a), 0.0, 0.0); }
Quat rot_y(double a) { return Quat(std::cos(0.5 * a), 0.0, std::sin(0.5 * a), 0.0); }
Quat rot_z(double a) { return Quat(std::cos(0.5 * a), 0.0, 0.0, std::sin(0.5 * a)); }

EulerXYZ decompose_euler_xyz(const Quat& q) {
  // R = Rx(a) Ry(b) Rz(c):
  //   R(0,2) = sin b, R(1,2) = -sin a cos b, R(2,2) = cos a cos b,
  //   R(0,1) = -cos b sin c, R(0,0) = cos b cos c.
  const Mat3 R = to_matrix(q);
  EulerXYZ e;
  const double s = std::clamp(R(0, 2), -1.0, 1.0);
  e.y = std::asin(s);
  if (std::abs(std::abs(e.y) - kPi / 2) < 1e-6) {
    e.gimbal_lock = true;
    e.z = 0.0;
    e.x = std::atan2(R(2, 1), R(1, 1));
    return e;
  }
  e.x = std::atan2(-R(1, 2), R(2, 2));
  e.z = std::atan2(-R(0, 1), R(0, 0));
  return e;
}

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Vec3 sign_canonical(const Vec3& v) {
  Eigen::Index i = 0;
  v.cwiseAbs().maxCoeff(&i);
  return v[i] < 0.0 ? Vec3(-v) : v;
}

Vec3 spherical_to_unit(double inclination, double azimuth) {
  return Vec3(std::sin(inclination) * std::cos(azimuth), std::sin(inclination) * std::sin(azimuth),
              std::cos(inclination));
}

void unit_to_spherical(const Vec3& v, double& inclination, double& azimuth) {
  const Vec3 u = v.normalized();
  inclination = std::acos(std::clamp(u.z(), -1.0, 1.0));
  azimuth = std::atan2(u.y(), u.x());
}

Vec3 any_orthogonal(const Vec3& v) {
  const Vec3 e = std::abs(v.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return v.cross(e).normalized();
}

Mat3 frame_with_x(const Vec3& u) {
  const Vec3 x = u.normalized();
  const Vec3 y = any_orthogonal(x);
  Mat3 R;
  R.col(0) = x;
  R.col(1) = y;
  R.col(2) = x.cross(y);
  return R;
}

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return S;
}

}  // namespace jointkin
