#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "warenav/geometry.hpp"

namespace {

using namespace warenav;

Twist random_twist(std::mt19937_64& rng, double max_angle = 3.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_angle);
  Vec3 axis(g(rng), g(rng), g(rng));
  axis.normalize();
  const Vec3 w = axis * u(rng);
  return Twist(g(rng), g(rng), g(rng), w.x(), w.y(), w.z());
}

TEST(Exp, ZeroTwistIsIdentity) {
  const auto t = exp_twist(Twist{});
  EXPECT_EQ(t.rotation, Mat3::Identity());
  EXPECT_EQ(t.translation, Vec3::Zero());
}

TEST(Exp, PureTranslation) {
  const auto t = exp_twist(Twist(1, 2, 3, 0, 0, 0));
  EXPECT_TRUE(t.rotation.isApprox(Mat3::Identity()));
  EXPECT_TRUE(t.translation.isApprox(Vec3(1, 2, 3)));
}

TEST(Exp, QuarterTurnAboutZ) {
  const auto t = exp_twist(Twist(0, 0, 0, 0, 0, std::numbers::pi / 2));
  EXPECT_NEAR((t * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Exp, MatchesMatrixExponentialSeries) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    const Twist xi = random_twist(rng);
    const Eigen::Matrix4d expected = oracle::expm(oracle::hat(xi.components));
    EXPECT_LT((exp_twist(xi).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12) << i;
  }
}

TEST(Exp, SmallAngleBranchIsContinuous) {
  for (double theta : {1e-9, 1e-8, 1.0000001e-8, 1e-7}) {
    const Twist xi(0.3, -0.2, 0.1, theta, 0.0, 0.0);
    const Eigen::Matrix4d expected = oracle::expm(oracle::hat(xi.components));
    EXPECT_LT((exp_twist(xi).matrix() - expected).cwiseAbs().maxCoeff(), 1e-15) << theta;
  }
}

TEST(Log, RoundTripsExp) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 2000; ++i) {
    const Twist xi = random_twist(rng, 3.1);
    EXPECT_LT((log_transform(exp_twist(xi)).components - xi.components).norm(), 1e-9) << i;
  }
}

TEST(Log, RejectsHalfTurn) {
  const SE3Transform t{exp_so3(Vec3(0, std::numbers::pi, 0)), Vec3(1, 0, 0)};
  try {
    (void)log_transform(t);
    FAIL() << "expected degenerate rotation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateRotation);
  }
}

TEST(Log, JustBelowHalfTurnStillWorks) {
  const Twist xi(0.1, 0.2, 0.3, 0.0, std::numbers::pi - 1e-4, 0.0);
  EXPECT_LT((log_transform(exp_twist(xi)).components - xi.components).norm(), 1e-8);
}

TEST(Transform, ComposeAndInvert) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto a = exp_twist(random_twist(rng));
    const auto b = exp_twist(random_twist(rng));
    const auto c = exp_twist(random_twist(rng));
    const Vec3 p(g(rng), g(rng), g(rng));
    EXPECT_LT((compose(a, invert(a)).matrix() - Eigen::Matrix4d::Identity()).norm(), 1e-12);
    EXPECT_LT((compose(compose(a, b), c).matrix() - compose(a, compose(b, c)).matrix()).norm(),
              1e-12);
    EXPECT_LT((transform_point(compose(a, b), p) - transform_point(a, transform_point(b, p))).norm(),
              1e-12);
    EXPECT_LT((invert(compose(a, b)).matrix() - compose(invert(b), invert(a)).matrix()).norm(),
              1e-12);
  }
}

TEST(Transform, IsIsometry) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto t = exp_twist(random_twist(rng));
    const Vec3 p(g(rng), g(rng), g(rng));
    const Vec3 q(g(rng), g(rng), g(rng));
    EXPECT_NEAR((t * p - t * q).norm(), (p - q).norm(), 1e-12);
    EXPECT_LT(orthonormality_error(t.rotation), 1e-14);
  }
}

TEST(Transform, HomogeneousMatrixAgreesWithPointMap) {
  const auto t = exp_twist(Twist(1, -2, 0.5, 0.3, 0.2, -0.1));
  const Vec3 p(0.4, 0.5, 0.6);
  const Eigen::Vector4d h = t.matrix() * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  EXPECT_LT((h.head<3>() - t * p).norm(), 1e-15);
}

TEST(Skew, VeeInvertsSkew) {
  const Vec3 v(1.5, -2.0, 0.25);
  EXPECT_EQ(vee(skew(v)), v);
  EXPECT_LT((skew(v) * Vec3(3, 4, 5) - v.cross(Vec3(3, 4, 5))).norm(), 1e-15);
}

TEST(RotationAngle, AccurateNearZero) {
  EXPECT_NEAR(rotation_angle(exp_so3(Vec3(1e-9, 0, 0))), 1e-9, 1e-20);
  EXPECT_NEAR(rotation_angle(exp_so3(Vec3(0, 2.5, 0))), 2.5, 1e-14);
}

TEST(WrapAngle, RangeIsHalfOpen) {
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2 * std::numbers::pi, 1e-15);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -std::numbers::pi);
    EXPECT_LE(w, std::numbers::pi);
    EXPECT_NEAR(std::remainder(a - w, 2 * std::numbers::pi), 0.0, 1e-12);
  }
}

}  // namespace
