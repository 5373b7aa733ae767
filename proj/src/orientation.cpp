#include "jointkin/orientation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jointkin/error.hpp"

namespace jointkin {

bool is_finite(const ImuSample& s) {
  return std::isfinite(s.t) && s.gyro.allFinite() && s.accel.allFinite() && s.mag.allFinite();
}

double accel_weight(const Vec3& accel, double gate) {
  const double d = std::abs(accel.norm() - kGravity);
  if (d <= gate) return 1.0;
  return std::min(1.0, (gate / d) * (gate / d));
}

double mag_weight(const Vec3& mag, double ref_norm, double gate) {
  const double d = std::abs(mag.norm() - ref_norm);
  if (d <= gate) return 1.0;
  return std::min(1.0, (gate / d) * (gate / d));
}

Quat initial_orientation(const ImuSample& s) {
  const double an = s.accel.norm();
  if (!(an > 1e-9)) return identity();
  const Vec3 up = s.accel / an;  // reference z in sensor coordinates
  Vec3 north = s.mag - s.mag.dot(up) * up;
  if (north.norm() < 1e-9) north = any_orthogonal(up);
  north.normalize();
  Mat3 R;  // rows: reference axes in sensor coordinates
  R.row(0) = north.transpose();
  R.row(1) = up.cross(north).transpose();
  R.row(2) = up.transpose();
  return from_matrix(R);
}

OrientationState update(const OrientationState& state, const ImuSample& s, const OrientationConfig& cfg) {
  if (!is_finite(s)) throw Error(ErrorCode::InvalidSample, "non-finite IMU sample");
  OrientationState out = state;
  if (!state.initialized) {
    out.q = initial_orientation(s);
    out.initialized = true;
    out.t0 = s.t;
    out.last_t = s.t;
    out.last_gyro = s.gyro;
    out.gain_acc = accel_weight(s.accel, cfg.acc_gate);
    out.gain_mag = mag_weight(s.mag, cfg.mag_ref_norm, cfg.mag_gate);
    return out;
  }
  const double dt = s.t - state.last_t;
  if (!(dt > 0.0)) throw Error(ErrorCode::TimeOrderError, "timestamp not increasing");

  const double boost = (s.t - state.t0) < cfg.quick_learn_time ? cfg.quick_learn_boost : 1.0;
  out.gain_acc = accel_weight(s.accel, cfg.acc_gate);
  out.gain_mag = mag_weight(s.mag, cfg.mag_ref_norm, cfg.mag_gate);

  // predict with the gyro, then correct against this sample's accel and mag
  // trapezoid plus the two-sample coning term
  const Vec3 phi = 0.5 * (s.gyro + state.last_gyro) * dt + state.last_gyro.cross(s.gyro) * (dt * dt / 12.0);
  const Quat pred = compose(state.q, from_rotvec(phi));
  const Quat qinv = pred.conjugate();
  const Vec3 up_s = rotate(qinv, Vec3::UnitZ());
  Vec3 e = Vec3::Zero();
  const double an = s.accel.norm();
  if (an > 1e-9) e += boost * cfg.kp_acc * out.gain_acc * (s.accel / an).cross(up_s);

  const double mn = s.mag.norm();
  if (mn > 1e-9) {
    // Predicted field direction: the measured field's horizontal part mapped
    // onto reference north, keeping its vertical part.
    const Vec3 m_ref = rotate(pred, s.mag / mn);
    const double h = std::hypot(m_ref.x(), m_ref.y());
    if (h > 1e-6) {
      const Vec3 w = rotate(qinv, Vec3(h, 0.0, m_ref.z()));
      const Vec3 em = (s.mag / mn).cross(w);
      e += boost * cfg.kp_mag * out.gain_mag * em.dot(up_s) * up_s;
    }
  }
  out.q = compose(pred, from_rotvec(e * dt));
  out.last_t = s.t;
  out.last_gyro = s.gyro;
  return out;
}

std::vector<Quat> batch_estimate(const ImuStream& stream, const OrientationState& initial,
                                 const OrientationConfig& cfg) {
  std::vector<Quat> out;
  out.reserve(stream.size());
  OrientationState st = initial;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    try {
      st = update(st, stream[i], cfg);
    } catch (const Error& err) {
      throw Error(err.code(), err.message() + " at sample " + std::to_string(i));
    }
    out.push_back(st.q);
  }
  return out;
}

}  // namespace jointkin
