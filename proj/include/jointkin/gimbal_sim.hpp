#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jointkin/imu.hpp"
#include "jointkin/math.hpp"

namespace jointkin {

struct SinusoidTerm {
  double amplitude = 0.0;  // rad (or m for translation)
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad
};

using AngleFunction = std::vector<SinusoidTerm>;

// Segment 2 = segment 1 * R(axis1, theta1) * R(axis3, theta3) * R(axis2, theta2).
// axis1 is fixed in segment 1, axis2 in segment 2, axis3 is the main axis
// carried by the intermediate ring. Sensor i = segment i * mount_i.
struct GimbalSpec {
  Vec3 axis1 = Vec3::UnitX();
  Vec3 axis2 = Vec3::UnitZ();
  Vec3 axis3 = Vec3::UnitY();
  Quat base = Quat(1.0, 0.0, 0.0, 0.0);  // segment 1 in world at zero base angles
  Quat mount1 = Quat(1.0, 0.0, 0.0, 0.0);  // sensor -> segment
  Quat mount2 = Quat(1.0, 0.0, 0.0, 0.0);
  Vec3 p1 = Vec3(0.02, 0.01, 0.15);     // joint centre -> sensor, segment coordinates (m)
  Vec3 p2 = Vec3(-0.016, -0.01, -0.12);
  Quat ref_offset = Quat(1.0, 0.0, 0.0, 0.0);      // true [g2] -> [g1] at t = 0
  Quat ref_offset_end = Quat(1.0, 0.0, 0.0, 0.0);  // at t = duration, used if time_varying_offset
  bool time_varying_offset = false;
  // false: offset injected into the oracle orientations of IMU 2.
  // true: IMU 2 sees a warped magnetic field so its own filter drifts by the
  // heading part of the offset. Both sensors then globalize the field to the
  // same direction, so field alignment cannot recover this offset.
  bool realistic_offset = false;
  double mag_dip = 0.0;  // rad, field inclination below horizontal
};

struct TrajectorySpec {
  AngleFunction theta1, theta2, theta3;
  AngleFunction base_yaw, base_pitch, base_roll;  // segment 1 attitude, z-y-x
  std::array<AngleFunction, 3> centre;            // joint centre translation in world (m)
  double duration = 60.0;     // s
  double sample_rate = 100.0; // Hz
  double still_time = 0.0;    // s of rest before motion fades in over ramp_time
  double ramp_time = 1.0;
};

struct NoiseSpec {
  double gyro_noise = 0.0;   // rad/s RMS per sample
  Vec3 gyro_bias = Vec3::Zero();
  double accel_noise = 0.0;  // m/s^2 RMS per sample
  Vec3 accel_bias = Vec3::Zero();
  double mag_noise = 0.0;    // RMS per component, field is unit length
  Vec3 mag_bias = Vec3::Zero();
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<double> t;
  std::vector<Vec3> angles;              // (theta1, theta2, theta3) per sample
  std::vector<Quat> world1, world2;      // sensor -> world
  std::vector<Quat> ref1, ref2;          // oracle sensor -> own reference frame
  std::vector<Quat> ref_offset;          // true [g2] -> [g1]
  std::vector<Vec3> w1, w2, dw1, dw2;    // noise-free body rates and their derivatives
  Vec3 j1 = Vec3::UnitX();  // [s1]
  Vec3 j2 = Vec3::UnitZ();  // [s2]
  Vec3 h1 = Vec3::UnitY();  // main axis in [s1] at zero pose
  Vec3 h2 = Vec3::UnitY();  // main axis in [s2] at zero pose
  Vec3 o1 = Vec3::Zero();   // joint centre -> sensor, [s1]
  Vec3 o2 = Vec3::Zero();
};

struct SimulationResult {
  ImuStream stream1, stream2;
  GroundTruth truth;
};

// Value and first two time derivatives of a sum of sinusoids.
void evaluate(const AngleFunction& f, double t, double& v, double& dv, double& ddv);

SimulationResult simulate(const GimbalSpec& spec, const TrajectorySpec& traj, const NoiseSpec& noise);

struct SensorMovementEvent {
  double t = 0.0;
  int imu = 2;  // 1 or 2
  Quat rotation = Quat(1.0, 0.0, 0.0, 0.0);  // extra mount rotation, new sensor -> old sensor
};

// Samples with t >= event.t are re-expressed in the rotated sensor frame.
// Throws EventOutOfRange.
ImuStream apply_event(const ImuStream& stream, const SensorMovementEvent& event);

// Same re-expression for a sensor orientation series and a truth record.
void apply_event(std::vector<Quat>& orientation, const std::vector<double>& t, const SensorMovementEvent& event);

struct Scenario {
  GimbalSpec gimbal;
  TrajectorySpec trajectory;
  NoiseSpec noise;
};

// Default noise: gyro 0.005 rad/s, accel 0.05 m/s^2, mag 1 %.
NoiseSpec default_noise(std::uint64_t seed);

// "hinge": main axis only. "gimbal": 3-DoF with small secondary motion.
// "walking": faster, larger main-axis swing. Throws InvalidArgument.
Scenario make_scenario(const std::string& name, std::uint64_t seed, double duration);

}  // namespace jointkin
