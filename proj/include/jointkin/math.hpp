#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace jointkin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kGravity = 9.80665;

inline double deg(double rad) { return rad * 180.0 / kPi; }
inline double rad(double deg) { return deg * kPi / 180.0; }

// Scalar-first construction; Eigen's own constructor already takes (w, x, y, z).
inline Quat quat(double w, double x, double y, double z) { return Quat(w, x, y, z); }

Quat identity();

// Unit norm and w >= 0.
Quat canonical(const Quat& q);

Quat conj(const Quat& q);

// Hamilton product q1 * q2, renormalized and canonicalized.
Quat compose(const Quat& q1, const Quat& q2);

// q v q^-1
Vec3 rotate(const Quat& q, const Vec3& v);

// Throws DegenerateAxis for a zero-norm axis. The axis is normalized before use.
Quat from_axis_angle(const Vec3& axis, double angle);

// Rotation vector (axis * angle) to quaternion; zero vector gives identity.
Quat from_rotvec(const Vec3& rv);

Mat3 to_matrix(const Quat& q);
Quat from_matrix(const Mat3& R);

// Total rotation angle in [0, pi].
double rotation_angle(const Quat& q);

Quat rot_x(double a);
Quat rot_y(double a);
Quat rot_z(double a);

struct EulerXYZ {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool gimbal_lock = false;
};

// q = X(x) * Y(y) * Z(z). Near |y| = pi/2 the split between x and z is not
// unique; z is pinned to 0 and gimbal_lock is set.
EulerXYZ decompose_euler_xyz(const Quat& q);

// Angle between two nonzero vectors, via atan2 for accuracy near 0 and pi.
double angle_between(const Vec3& a, const Vec3& b);

// Flip so the largest-magnitude component is positive.
Vec3 sign_canonical(const Vec3& v);

// Unit vector from (inclination, azimuth).
Vec3 spherical_to_unit(double inclination, double azimuth);
void unit_to_spherical(const Vec3& v, double& inclination, double& azimuth);

// Any unit vector orthogonal to v.
Vec3 any_orthogonal(const Vec3& v);

// Rotation taking the x axis onto the unit vector u.
Mat3 frame_with_x(const Vec3& u);

Mat3 skew(const Vec3& v);

}  // namespace jointkin
