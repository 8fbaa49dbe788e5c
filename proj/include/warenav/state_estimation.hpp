// Linear Kalman filter over [x, dx, z, dz, theta, dtheta].
//
// Naming note: R_t is the process-noise covariance and Q_t the
// measurement-noise covariance (swapped relative to most textbooks).

#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "warenav/errors.hpp"
#include "warenav/geometry.hpp"
#include "warenav/robot_kinematics.hpp"

namespace warenav {

namespace state_index {
inline constexpr int kX = 0;
inline constexpr int kVx = 1;
inline constexpr int kZ = 2;
inline constexpr int kVz = 3;
inline constexpr int kTheta = 4;
inline constexpr int kOmega = 5;
}  // namespace state_index

struct FilterState {
  Vec6 mean = Vec6::Zero();
  Mat6 covariance = Mat6::Identity();

  [[nodiscard]] RobotPose pose() const {
    return {mean[state_index::kX], mean[state_index::kZ], wrap_angle(mean[state_index::kTheta])};
  }
};

/// Yaw-channel measurement covariance (theta, dtheta) estimated from
/// roughly 3500 samples recorded on the robot.
[[nodiscard]] inline Eigen::Matrix2d default_yaw_measurement_covariance() {
  Eigen::Matrix2d q;
  q << 1023.684, 0.221, 0.221, 25.228;
  return q;
}

struct NoiseConfig {
  double k1 = 0.1;  // x acceleration std-dev
  double k2 = 0.1;  // z acceleration std-dev
  double k3 = 0.1;  // yaw acceleration std-dev
  double period = 1.0 / 60.0;
  Mat6 measurement_covariance = Mat6::Identity();

  void validate() const {
    if (!(k1 > 0.0) || !(k2 > 0.0) || !(k3 > 0.0) || !(period > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "noise parameters must be positive");
    }
  }
};

/// block-diag(B, B, B) with B = [1 T; 0 1].
[[nodiscard]] inline Mat6 transition_matrix(double period) {
  if (!(period > 0.0)) throw Error(ErrorCode::kInvalidArgument, "T must be positive");
  Mat6 a = Mat6::Identity();
  a(0, 1) = a(2, 3) = a(4, 5) = period;
  return a;
}

/// block-diag(D1, D2, D3), D = k^2 [T^4/4 T^3/2; T^3/2 T^2].
[[nodiscard]] inline Mat6 process_noise(double period, double k1, double k2, double k3) {
  if (!(period > 0.0) || !(k1 > 0.0) || !(k2 > 0.0) || !(k3 > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "process noise parameters must be positive");
  }
  const double t2 = period * period;
  const double t3 = t2 * period;
  const double t4 = t3 * period;
  Mat6 r = Mat6::Zero();
  const double ks[3] = {k1, k2, k3};
  for (int axis = 0; axis < 3; ++axis) {
    const double k2s = ks[axis] * ks[axis];
    const int o = 2 * axis;
    r(o, o) = 0.25 * t4 * k2s;
    r(o, o + 1) = r(o + 1, o) = 0.5 * t3 * k2s;
    r(o + 1, o + 1) = t2 * k2s;
  }
  return r;
}

[[nodiscard]] inline FilterState kf_predict(const FilterState& s, const Mat6& transition,
                                            const Mat6& process_cov) {
  FilterState out;
  out.mean = transition * s.mean;
  out.covariance = transition * s.covariance * transition.transpose() + process_cov;
  return out;
}

/// Full-state update with E = I. The yaw innovation is wrapped to (-pi, pi]
/// and the posterior covariance symmetrised.
[[nodiscard]] inline FilterState kf_update(const FilterState& predicted, const Vec6& measurement,
                                           const Mat6& measurement_cov) {
  const Mat6 innovation_cov = predicted.covariance + measurement_cov;
  Eigen::FullPivLU<Mat6> lu(innovation_cov);
  lu.setThreshold(1e-14);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kSingularInnovation, "innovation covariance is singular");
  }
  const Mat6 gain = predicted.covariance * innovation_cov.inverse();
  Vec6 innovation = measurement - predicted.mean;
  innovation[state_index::kTheta] = wrap_angle(innovation[state_index::kTheta]);

  FilterState out;
  out.mean = predicted.mean + gain * innovation;
  out.covariance = (Mat6::Identity() - gain) * predicted.covariance;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

/// Unbiased sample covariance (n - 1 denominator) of equal-length samples.
[[nodiscard]] inline Eigen::MatrixXd estimate_measurement_covariance(
    const std::vector<Eigen::VectorXd>& samples) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "need at least two samples");
  }
  const auto dim = samples.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) {
    if (s.size() != dim) throw Error(ErrorCode::kInvalidArgument, "sample size mismatch");
    mean += s;
  }
  mean /= static_cast<double>(samples.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& s : samples) {
    const Eigen::VectorXd d = s - mean;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(samples.size() - 1);
}

/// Sequential filter owning its state and noise model.
class RobotStateFilter {
 public:
  RobotStateFilter(const NoiseConfig& noise, const FilterState& initial)
      : noise_(noise), state_(initial) {
    noise_.validate();
    transition_ = transition_matrix(noise_.period);
    process_ = process_noise(noise_.period, noise_.k1, noise_.k2, noise_.k3);
  }

  /// Predict then update with one measurement. Channels flagged missing get
  /// their measurement variance inflated so the update ignores them.
  const FilterState& step(const Vec6& measurement,
                          const Eigen::Matrix<bool, 6, 1>& present =
                              Eigen::Matrix<bool, 6, 1>::Constant(true)) {
    Mat6 q = noise_.measurement_covariance;
    for (int i = 0; i < 6; ++i) {
      if (!present[i]) {
        q.row(i).setZero();
        q.col(i).setZero();
        q(i, i) = 1e12;
      }
    }
    state_ = kf_update(kf_predict(state_, transition_, process_), measurement, q);
    return state_;
  }

  [[nodiscard]] const FilterState& state() const { return state_; }
  [[nodiscard]] const NoiseConfig& noise() const { return noise_; }

 private:
  NoiseConfig noise_;
  FilterState state_;
  Mat6 transition_;
  Mat6 process_;
};

}  // namespace warenav
