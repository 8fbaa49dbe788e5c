#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "warenav/robot_kinematics.hpp"

namespace {

using namespace warenav;

TEST(Kinematics, WheelSpeedsMatchMatrix) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const BodyVelocity v{u(rng), u(rng), u(rng)};
    const double L = 0.05 + std::abs(u(rng));
    const Vec3 expected = kinematic_matrix(L) * Vec3(v.vx, v.vz, v.omega);
    const auto w = wheel_speeds(v, L);
    EXPECT_NEAR(w.v1, expected[0], 1e-12);
    EXPECT_NEAR(w.v2, expected[1], 1e-12);
    EXPECT_NEAR(w.v3, expected[2], 1e-12);
  }
}

TEST(Kinematics, InverseRoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const BodyVelocity v{u(rng), u(rng), u(rng)};
    const auto back = body_velocity_from_wheels(wheel_speeds(v, 0.1), 0.1);
    EXPECT_NEAR(back.vx, v.vx, 1e-12);
    EXPECT_NEAR(back.vz, v.vz, 1e-12);
    EXPECT_NEAR(back.omega, v.omega, 1e-12);
    const Vec3 solved = kinematic_matrix(0.1).inverse() *
                        Vec3(wheel_speeds(v, 0.1).v1, wheel_speeds(v, 0.1).v2,
                             wheel_speeds(v, 0.1).v3);
    EXPECT_NEAR(solved[0], v.vx, 1e-12);
  }
}

TEST(Kinematics, PureMotions) {
  const auto spin = wheel_speeds({0, 0, 2.0}, 0.1);
  EXPECT_DOUBLE_EQ(spin.v1, 0.2);
  EXPECT_DOUBLE_EQ(spin.v2, 0.2);
  EXPECT_DOUBLE_EQ(spin.v3, 0.2);
  const auto forward = wheel_speeds({0, 1.0, 0}, 0.1);
  EXPECT_DOUBLE_EQ(forward.v1, std::numbers::sqrt3 / 2.0);
  EXPECT_DOUBLE_EQ(forward.v2, -std::numbers::sqrt3 / 2.0);
  EXPECT_DOUBLE_EQ(forward.v3, 0.0);
}

TEST(Kinematics, RejectsNonPositiveRadius) {
  EXPECT_THROW((void)wheel_speeds({1, 0, 0}, 0.0), Error);
  EXPECT_THROW((void)body_velocity_from_wheels({1, 0, 0}, -1.0), Error);
}

TEST(Kinematics, FrameRotation) {
  // Forward motion at theta points along the bearing theta.
  for (double theta : {0.0, 0.3, 1.5, -2.0, 3.1}) {
    const Vec2 w = body_to_world(0.0, 1.0, theta);
    EXPECT_NEAR(bearing(w[0], w[1]), theta, 1e-12);
    const Vec2 b = world_to_body(w[0], w[1], theta);
    EXPECT_NEAR(b[0], 0.0, 1e-12);
    EXPECT_NEAR(b[1], 1.0, 1e-12);
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 100; ++i) {
    const double x = u(rng), z = u(rng), t = u(rng);
    const Vec2 w = body_to_world(x, z, t);
    EXPECT_NEAR(w.norm(), std::hypot(x, z), 1e-12);
    const Vec2 b = world_to_body(w[0], w[1], t);
    EXPECT_NEAR(b[0], x, 1e-12);
    EXPECT_NEAR(b[1], z, 1e-12);
  }
}

TEST(Kinematics, BearingQuadrants) {
  EXPECT_DOUBLE_EQ(bearing(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(bearing(1, 0), std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(bearing(-1, 0), -std::numbers::pi / 2);
  EXPECT_DOUBLE_EQ(bearing(0, -1), std::numbers::pi);
}

SE3Transform yawed(double theta, const Vec3& position) {
  // Camera-to-world for a camera at `position` whose optical axis has
  // bearing theta.
  return {exp_so3(Vec3(0, theta, 0)), position};
}

TEST(RobotPose, FromKeyframeChain) {
  const auto k1 = yawed(0.0, {0, 0, 0});
  const auto k2 = yawed(0.4, {0.5, 0, 1.0});
  const auto frame = yawed(0.9, {0.8, 0.1, 1.7});
  const std::vector<SE3Transform> links{invert(k2) * k1};
  const auto pose = robot_pose_from_transforms(links, invert(frame) * k2);
  EXPECT_NEAR(pose.x, 0.8, 1e-12);
  EXPECT_NEAR(pose.z, 1.7, 1e-12);
  EXPECT_NEAR(pose.theta, 0.9, 1e-12);
}

TEST(RobotPose, HeadingIsWrapped) {
  const auto pose = robot_pose_from_transforms({}, invert(yawed(3.5, {0, 0, 0})));
  EXPECT_NEAR(pose.theta, 3.5 - 2 * std::numbers::pi, 1e-12);
}

TEST(RobotPose, DownwardCameraIsDegenerate) {
  const SE3Transform down{exp_so3(Vec3(std::numbers::pi / 2, 0, 0)), Vec3::Zero()};
  try {
    (void)robot_pose_from_transforms({}, invert(down));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateHeading);
  }
}

}  // namespace
