#pragma once

#include <vector>

#include "jointkin/imu.hpp"
#include "jointkin/math.hpp"

namespace jointkin {

// Complementary filter gains. The accel term pulls the estimated up vector
// toward the measured specific force; the mag term only corrects heading.
struct OrientationConfig {
  double kp_acc = 1.0;           // rad/s per unit cross-product error
  double kp_mag = 1.0;
  double acc_gate = 0.5;         // m/s^2, full weight below this | |a| - g |
  double mag_gate = 0.1;         // full weight below this | |m| - m_ref |
  double mag_ref_norm = 1.0;
  double quick_learn_time = 1.0; // s of boosted gains after initialization
  double quick_learn_boost = 10.0;
};

struct OrientationState {
  Quat q = Quat(1.0, 0.0, 0.0, 0.0);  // sensor -> reference
  double gain_acc = 1.0;
  double gain_mag = 1.0;
  double last_t = 0.0;
  bool initialized = false;
  double t0 = 0.0;
  Vec3 last_gyro = Vec3::Zero();
};

// Weight in [0,1] applied to the accel correction; 1 up to the gate, then
// falling off as (gate / discrepancy)^2.
double accel_weight(const Vec3& accel, double gate);
double mag_weight(const Vec3& mag, double ref_norm, double gate);

// Tilt from accel, heading from the horizontal part of mag (x = magnetic north, z = up).
Quat initial_orientation(const ImuSample& s);

// Throws TimeOrderError (t not increasing) or InvalidSample (non-finite).
// An uninitialized state is seeded from the sample.
OrientationState update(const OrientationState& state, const ImuSample& s,
                        const OrientationConfig& cfg = {});

// Errors are rethrown with the sample index in the message.
std::vector<Quat> batch_estimate(const ImuStream& stream, const OrientationState& initial = {},
                                 const OrientationConfig& cfg = {});

}  // namespace jointkin
