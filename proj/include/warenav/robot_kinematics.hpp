// Three-wheeled omnidirectional base.
//
// Planar convention shared by the whole stack: positions are (x, z) in the
// first keyframe's camera frame, heading theta = 0 looks along +z and
// positive theta turns +z towards +x (a positive rotation about the camera
// y axis). Body velocities are expressed in the robot frame: vz forward
// along the optical axis, vx to the right, omega = d(theta)/dt.

#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "warenav/errors.hpp"
#include "warenav/geometry.hpp"

namespace warenav {

struct BodyVelocity {
  double vx = 0.0;
  double vz = 0.0;
  double omega = 0.0;
};

struct WheelSpeeds {
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
};

struct RobotPose {
  double x = 0.0;
  double z = 0.0;
  double theta = 0.0;
};

inline constexpr double kDefaultWheelRadius = 0.1;

/// Wheel-speed matrix rows (-1/2, sqrt3/2, L), (-1/2, -sqrt3/2, L), (1, 0, L).
[[nodiscard]] inline Mat3 kinematic_matrix(double wheel_radius) {
  const double s = std::numbers::sqrt3 / 2.0;
  Mat3 m;
  // clang-format off
  m << -0.5,  s,   wheel_radius,
       -0.5, -s,   wheel_radius,
        1.0,  0.0, wheel_radius;
  // clang-format on
  return m;
}

/// Signed rim speeds for a body velocity.
[[nodiscard]] inline WheelSpeeds wheel_speeds(const BodyVelocity& v, double wheel_radius) {
  if (!(wheel_radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "L must be positive");
  const double s = std::numbers::sqrt3 / 2.0;
  const double spin = wheel_radius * v.omega;
  return {-0.5 * v.vx + s * v.vz + spin, -0.5 * v.vx - s * v.vz + spin, v.vx + spin};
}

/// Inverse of wheel_speeds.
[[nodiscard]] inline BodyVelocity body_velocity_from_wheels(const WheelSpeeds& w,
                                                            double wheel_radius) {
  if (!(wheel_radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "L must be positive");
  const double omega = (w.v1 + w.v2 + w.v3) / (3.0 * wheel_radius);
  return {w.v3 - wheel_radius * omega, (w.v1 - w.v2) / std::numbers::sqrt3, omega};
}

/// Rotates a robot-frame planar vector (vx, vz) into the world by theta.
[[nodiscard]] inline Vec2 body_to_world(double vx, double vz, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {vx * c + vz * s, -vx * s + vz * c};
}

/// Inverse of body_to_world; returns (vx, vz).
[[nodiscard]] inline Vec2 world_to_body(double wx, double wz, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {wx * c - wz * s, wx * s + wz * c};
}

/// Heading of a planar direction (dx, dz).
[[nodiscard]] inline double bearing(double dx, double dz) { return std::atan2(dx, dz); }

/// Robot pose from the keyframe links and the current frame's transform
/// relative to the newest keyframe: position is the camera centre mapped
/// through the inverted chain, heading is the optical axis projected onto
/// the motion plane.
[[nodiscard]] inline RobotPose robot_pose_from_transforms(const std::vector<SE3Transform>& links,
                                                          const SE3Transform& current) {
  SE3Transform to_world = SE3Transform::identity();
  for (const auto& link : links) to_world = to_world * invert(link);
  to_world = to_world * invert(current);
  const Vec3 origin = to_world * Vec3::Zero();
  const Vec3 axis = to_world.rotation * Vec3::UnitZ();
  if (std::hypot(axis.x(), axis.z()) < 1e-9) {
    throw Error(ErrorCode::kDegenerateHeading, "optical axis is perpendicular to the floor");
  }
  return {origin.x(), origin.z(), wrap_angle(bearing(axis.x(), axis.z()))};
}

}  // namespace warenav
