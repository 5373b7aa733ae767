#pragma once

#include <vector>

#include "jointkin/math.hpp"

namespace jointkin {

struct ImuSample {
  double t = 0.0;  // s
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2
  Vec3 mag = Vec3::Zero();    // normalized flux
};

using ImuStream = std::vector<ImuSample>;

bool is_finite(const ImuSample& s);

}  // namespace jointkin
