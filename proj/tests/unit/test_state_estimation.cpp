#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "warenav/state_estimation.hpp"

namespace {

using namespace warenav;

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

TEST(KalmanModel, TransitionMatrix) {
  const Mat6 a = transition_matrix(0.5);
  Mat6 expected = Mat6::Identity();
  expected(0, 1) = expected(2, 3) = expected(4, 5) = 0.5;
  EXPECT_EQ(a, expected);
  EXPECT_THROW((void)transition_matrix(0.0), Error);
}

TEST(KalmanModel, ProcessNoiseBlocks) {
  const double t = 0.1;
  const Mat6 r = process_noise(t, 1.0, 2.0, 3.0);
  const double ks[3] = {1.0, 2.0, 3.0};
  for (int axis = 0; axis < 3; ++axis) {
    const int o = 2 * axis;
    const double k2 = ks[axis] * ks[axis];
    // Covariance of (a T^2 / 2, a T) for acceleration a with std-dev k.
    const Eigen::Vector2d g(t * t / 2, t);
    const Eigen::Matrix2d expected = k2 * g * g.transpose();
    EXPECT_LT(max_abs(r.block<2, 2>(o, o) - expected), 1e-15);
  }
  EXPECT_EQ(r(0, 2), 0.0);
  EXPECT_EQ(r(1, 5), 0.0);
  EXPECT_THROW((void)process_noise(t, 0.0, 1.0, 1.0), Error);
}

TEST(KalmanUpdate, MatchesReferenceCycle) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    FilterState s;
    for (int j = 0; j < 6; ++j) s.mean[j] = g(rng);
    s.covariance = oracle::random_spd(rng, 0.01, 2.0);
    const Mat6 a = transition_matrix(1.0 / 60.0);
    const Mat6 r = process_noise(1.0 / 60.0, 0.1, 0.2, 0.3);
    const Mat6 q = oracle::random_spd(rng, 0.01, 2.0);
    Vec6 z;
    for (int j = 0; j < 6; ++j) z[j] = g(rng);
    const auto ref = oracle::kalman_cycle(s.mean, s.covariance, a, r, q, z);
    const auto got = kf_update(kf_predict(s, a, r), z, q);
    EXPECT_LT(max_abs(got.mean - ref.mean), 1e-12);
    EXPECT_LT(max_abs(got.covariance - ref.covariance), 1e-12);
  }
}

TEST(KalmanUpdate, YawInnovationWraps) {
  FilterState s;
  s.mean[state_index::kTheta] = 3.1;
  s.covariance = Mat6::Identity();
  Vec6 z = s.mean;
  z[state_index::kTheta] = -3.1;
  const auto out = kf_update(s, z, Mat6::Identity());
  // Halfway across the +-pi seam, not back through zero.
  EXPECT_NEAR(out.mean[state_index::kTheta], 3.1 + (2 * std::numbers::pi - 6.2) / 2, 1e-12);
}

TEST(KalmanUpdate, SingularInnovationIsReported) {
  FilterState s;
  s.covariance = Mat6::Zero();
  try {
    (void)kf_update(s, Vec6::Zero(), Mat6::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularInnovation);
  }
}

TEST(KalmanFilter, CovarianceStaysSymmetricPositive) {
  std::mt19937_64 spd_rng(2);
  NoiseConfig noise;
  noise.measurement_covariance = oracle::random_spd(spd_rng, 1e-3, 1.0);
  RobotStateFilter filter(noise, FilterState{});
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    Vec6 z;
    for (int j = 0; j < 6; ++j) z[j] = g(rng);
    const auto& s = filter.step(z);
    ASSERT_EQ(s.covariance, s.covariance.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(s.covariance);
    ASSERT_GT(eig.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(KalmanFilter, TracksConstantVelocity) {
  NoiseConfig noise;
  noise.measurement_covariance = 1e-4 * Mat6::Identity();
  RobotStateFilter filter(noise, FilterState{});
  const double t = noise.period;
  for (int i = 1; i <= 600; ++i) {
    Vec6 z;
    z << 0.5 * i * t, 0.5, -0.2 * i * t, -0.2, 0.1 * i * t, 0.1;
    filter.step(z);
  }
  const auto& m = filter.state().mean;
  EXPECT_NEAR(m[state_index::kX], 0.5 * 10, 1e-3);
  EXPECT_NEAR(m[state_index::kVz], -0.2, 1e-3);
  EXPECT_NEAR(m[state_index::kOmega], 0.1, 1e-3);
}

TEST(KalmanFilter, MissingChannelIsIgnored) {
  NoiseConfig noise;
  RobotStateFilter filter(noise, FilterState{});
  Eigen::Matrix<bool, 6, 1> present = Eigen::Matrix<bool, 6, 1>::Constant(true);
  present[state_index::kX] = false;
  Vec6 z = Vec6::Zero();
  z[state_index::kX] = 1e6;
  filter.step(z, present);
  EXPECT_LT(std::abs(filter.state().mean[state_index::kX]), 1e-3);
}

TEST(KalmanFilter, RejectsBadNoise) {
  NoiseConfig noise;
  noise.k2 = 0.0;
  EXPECT_THROW(RobotStateFilter(noise, FilterState{}), Error);
}

TEST(MeasurementCovariance, UnbiasedEstimate) {
  std::vector<Eigen::VectorXd> samples;
  for (double x : {1.0, 2.0, 3.0, 4.0}) samples.push_back(Eigen::Vector2d(x, 2 * x));
  const auto cov = estimate_measurement_covariance(samples);
  // Var of {1,2,3,4} with n - 1 is 5/3.
  EXPECT_NEAR(cov(0, 0), 5.0 / 3.0, 1e-15);
  EXPECT_NEAR(cov(0, 1), 10.0 / 3.0, 1e-15);
  EXPECT_NEAR(cov(1, 1), 20.0 / 3.0, 1e-14);
  EXPECT_THROW((void)estimate_measurement_covariance({Eigen::Vector2d(1, 1)}), Error);
  EXPECT_THROW((void)estimate_measurement_covariance({Eigen::Vector2d(1, 1), Eigen::Vector3d(1, 1, 1)}),
               Error);
}

TEST(MeasurementCovariance, RecordedYawNoise) {
  const auto q = default_yaw_measurement_covariance();
  EXPECT_DOUBLE_EQ(q(0, 0), 1023.684);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.221);
  EXPECT_DOUBLE_EQ(q(1, 0), 0.221);
  EXPECT_DOUBLE_EQ(q(1, 1), 25.228);
}

}  // namespace
