// Rigid-body transform algebra on SE(3) and its tangent space se(3).
//
// Twists are ordered (rho, omega): three translational components followed
// by three rotational components in radians.

#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/LU>

#include "warenav/errors.hpp"

namespace warenav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Below this rotation angle exp/log switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

/// log() refuses rotations this close to pi, where the axis is ambiguous.
inline constexpr double kNearPi = 1e-6;

struct Twist {
  Vec6 components = Vec6::Zero();

  Twist() = default;
  explicit Twist(const Vec6& v) : components(v) {}
  Twist(double tx, double ty, double tz, double wx, double wy, double wz) {
    components << tx, ty, tz, wx, wy, wz;
  }

  [[nodiscard]] Vec3 translation() const { return components.head<3>(); }
  [[nodiscard]] Vec3 rotation() const { return components.tail<3>(); }
  [[nodiscard]] double norm() const { return components.norm(); }
  [[nodiscard]] bool finite() const { return components.allFinite(); }
};

struct SE3Transform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] static SE3Transform identity() { return {}; }

  [[nodiscard]] static SE3Transform from_translation(const Vec3& t) {
    return {Mat3::Identity(), t};
  }

  /// Applies this transform to a point: R * p + t.
  [[nodiscard]] Vec3 operator*(const Vec3& p) const {
    return rotation * p + translation;
  }

  /// Composition; (a * b) * p == a * (b * p).
  [[nodiscard]] SE3Transform operator*(const SE3Transform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  /// 4x4 homogeneous form, for interfaces that want it.
  [[nodiscard]] Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

[[nodiscard]] inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<  0.0,   -v.z(),  v.y(),
        v.z(),  0.0,   -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return s;
}

[[nodiscard]] inline Vec3 vee(const Mat3& s) {
  return {s(2, 1), s(0, 2), s(1, 0)};
}

namespace detail {

// Coefficients of the SO(3) exponential and its left Jacobian:
//   a = sin(t)/t, b = (1 - cos t)/t^2, c = (t - sin t)/t^3.
struct ExpCoefficients {
  double a, b, c;
};

inline ExpCoefficients exp_coefficients(double theta) {
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    return {1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0};
  }
  const double half_sin = std::sin(0.5 * theta);
  const double t2 = theta * theta;
  return {std::sin(theta) / theta, 2.0 * half_sin * half_sin / t2,
          (theta - std::sin(theta)) / (t2 * theta)};
}

}  // namespace detail

[[nodiscard]] inline Mat3 exp_so3(const Vec3& omega) {
  const double theta = omega.norm();
  const auto k = detail::exp_coefficients(theta);
  const Mat3 w = skew(omega);
  return Mat3::Identity() + k.a * w + k.b * w * w;
}

/// Closed-form exponential map se(3) -> SE(3).
[[nodiscard]] inline SE3Transform exp_twist(const Twist& delta) {
  const Vec3 omega = delta.rotation();
  const double theta = omega.norm();
  const auto k = detail::exp_coefficients(theta);
  const Mat3 w = skew(omega);
  const Mat3 w2 = w * w;
  const Mat3 rotation = Mat3::Identity() + k.a * w + k.b * w2;
  const Mat3 left_jacobian = Mat3::Identity() + k.b * w + k.c * w2;
  return {rotation, left_jacobian * delta.translation()};
}

/// Rotation angle of R in [0, pi], computed without the acos precision loss
/// near zero.
[[nodiscard]] inline double rotation_angle(const Mat3& r) {
  const double s = 0.5 * vee(r - r.transpose()).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

/// Logarithm SE(3) -> se(3). Throws kDegenerateRotation when the rotation
/// angle is within kNearPi of pi.
[[nodiscard]] inline Twist log_transform(const SE3Transform& t) {
  const double theta = rotation_angle(t.rotation);
  if (std::numbers::pi - theta < kNearPi) {
    throw Error(ErrorCode::kDegenerateRotation,
                "rotation angle is pi; logarithm axis is ambiguous");
  }
  const Vec3 axis_part = vee(t.rotation - t.rotation.transpose());
  Vec3 omega;
  if (theta < kSmallAngle) {
    omega = 0.5 * axis_part;
  } else {
    omega = (theta / (2.0 * std::sin(theta))) * axis_part;
  }
  const auto k = detail::exp_coefficients(theta);
  const Mat3 w = skew(omega);
  const Mat3 left_jacobian = Mat3::Identity() + k.b * w + k.c * w * w;
  const Vec3 rho = left_jacobian.partialPivLu().solve(t.translation);
  Twist out;
  out.components << rho, omega;
  return out;
}

[[nodiscard]] inline SE3Transform invert(const SE3Transform& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -rt * t.translation};
}

[[nodiscard]] inline SE3Transform compose(const SE3Transform& a,
                                          const SE3Transform& b) {
  return a * b;
}

[[nodiscard]] inline Vec3 transform_point(const SE3Transform& t, const Vec3& p) {
  return t * p;
}

/// Largest deviation of R^T R from identity and of det R from one.
[[nodiscard]] inline double orthonormality_error(const Mat3& r) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

/// Wraps an angle to (-pi, pi].
[[nodiscard]] inline double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::remainder(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

}  // namespace warenav
