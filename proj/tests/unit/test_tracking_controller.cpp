#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "warenav/sim_harness.hpp"
#include "warenav/tracking_controller.hpp"

namespace {

using namespace warenav;

// Unit cells keep the centres at half-integers, exactly representable.
constexpr double kCell = 1.0;

PlannedPath path_of(std::initializer_list<CellIndex> cells) { return {cells}; }

ControllerConfig unit_config() {
  ControllerConfig cfg;
  cfg.arrival_radius = 0.25;
  return cfg;
}

TEST(Controller, FarDrivesStraightAtTarget) {
  const auto cfg = unit_config();
  const auto out =
      control_step({0.5, 0.5, 0.0}, path_of({{0, 1}}), {}, cfg, kCell, kCell);
  EXPECT_EQ(out.status.phase, TrackingPhase::kFar);
  EXPECT_DOUBLE_EQ(out.command.vx, 0.0);
  EXPECT_DOUBLE_EQ(out.command.vz, cfg.k_p1);
  EXPECT_DOUBLE_EQ(out.command.omega, 0.0);
  EXPECT_DOUBLE_EQ(out.status.e_z, 1.0);
}

TEST(Controller, FarTurnsTowardsBearing) {
  const auto cfg = unit_config();
  // Target straight along +x while facing +z: bearing error +pi/2.
  const auto out = control_step({0.5, 0.5, 0.0}, path_of({{3, 0}}), {}, cfg, kCell, kCell);
  EXPECT_NEAR(out.status.e_theta, std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(out.command.omega, cfg.k_p2 * std::numbers::pi / 2, 1e-15);
  // Translation is still aimed at the target, i.e. +x in the world.
  const Vec2 w = body_to_world(out.command.vx, out.command.vz, 0.0);
  EXPECT_NEAR(w.x(), cfg.k_p1, 1e-15);
  EXPECT_NEAR(w.y(), 0.0, 1e-15);
}

TEST(Controller, ArrivalStartsAlignment) {
  const auto cfg = unit_config();
  const double beta = cfg.beta;
  // At the first centre, facing 2 beta away from the next one.
  const auto out =
      control_step({0.5, 0.5, -2 * beta}, path_of({{0, 0}, {0, 1}}), {}, cfg, kCell, kCell);
  EXPECT_EQ(out.status.phase, TrackingPhase::kAligning);
  EXPECT_EQ(out.status.waypoint_index, 0u);
  EXPECT_DOUBLE_EQ(out.command.vx, 0.0);
  EXPECT_DOUBLE_EQ(out.command.vz, 0.0);
  EXPECT_NEAR(out.command.omega, cfg.k_p2 * 2 * beta, 1e-15);
}

TEST(Controller, AlignmentToleranceIsInclusive) {
  const auto cfg = unit_config();
  const TrackingStatus aligning{TrackingPhase::kAligning, 0};
  const auto out = control_step({0.5, 0.5, -cfg.beta}, path_of({{0, 0}, {0, 1}}), aligning, cfg,
                                kCell, kCell);
  EXPECT_EQ(out.status.phase, TrackingPhase::kFar);
  EXPECT_EQ(out.status.waypoint_index, 1u);
  EXPECT_GT(out.command.vz, 0.0);
}

TEST(Controller, ArrivalRadiusIsInclusive) {
  const auto cfg = unit_config();
  EXPECT_TRUE(waypoint_reached({0.5, 1.25, 0.0}, {0.5, 1.5}, 0.25));
  EXPECT_FALSE(waypoint_reached({0.5, 1.2, 0.0}, {0.5, 1.5}, 0.25));
  const auto out =
      control_step({0.5, 1.25, 0.0}, path_of({{0, 0}, {0, 1}}), {TrackingPhase::kFar, 1}, cfg,
                   kCell, kCell);
  EXPECT_EQ(out.status.phase, TrackingPhase::kDone);
}

TEST(Controller, DoneIsAbsorbing) {
  const auto cfg = unit_config();
  const TrackingStatus done{TrackingPhase::kDone, 1};
  for (const RobotPose p : {RobotPose{0.5, 1.5, 0.0}, RobotPose{9, -4, 2.0}}) {
    const auto out = control_step(p, path_of({{0, 0}, {0, 1}}), done, cfg, kCell, kCell);
    EXPECT_EQ(out.status.phase, TrackingPhase::kDone);
    EXPECT_EQ(out.command.vx, 0.0);
    EXPECT_EQ(out.command.vz, 0.0);
    EXPECT_EQ(out.command.omega, 0.0);
  }
}

TEST(Controller, Errors) {
  const auto cfg = unit_config();
  try {
    (void)control_step({0, 0, 0}, PlannedPath{}, {}, cfg, kCell, kCell);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPath);
  }
  try {
    (void)control_step({NAN, 0, 0}, path_of({{0, 0}}), {}, cfg, kCell, kCell);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidEstimate);
  }
  ControllerConfig bad = cfg;
  bad.beta = 2.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.k_p1 = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Controller, ExpectedPositionProjectsOntoSegment) {
  const auto path = path_of({{0, 0}, {0, 1}, {1, 1}});
  const TrackingStatus s{TrackingPhase::kFar, 1};
  const Vec2 pe = expected_position({0.7, 1.1, 0.0}, path, s, kCell, kCell);
  EXPECT_DOUBLE_EQ(pe.x(), 0.5);
  EXPECT_DOUBLE_EQ(pe.y(), 1.1);
  // Clamped to the segment ends.
  EXPECT_DOUBLE_EQ(expected_position({0.5, 9.0, 0.0}, path, s, kCell, kCell).y(), 1.5);
  EXPECT_DOUBLE_EQ(expected_position({0.5, -9.0, 0.0}, path, s, kCell, kCell).y(), 0.5);
  // The first waypoint has no incoming segment.
  EXPECT_EQ(expected_position({3, 3, 0}, path, {}, kCell, kCell), Vec2(0.5, 0.5));
}

// With a perfect pose the controller reaches DONE from anywhere near the
// start, waypoint indices never decrease and the FAR speed is exactly k_p1.
TEST(Controller, ConvergesOnRandomPaths) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> jitter(-0.3, 0.3);
  std::uniform_real_distribution<double> heading(-3.0, 3.0);
  std::uniform_int_distribution<int> dir(0, 3);
  const auto cfg = unit_config();
  for (int trial = 0; trial < 30; ++trial) {
    PlannedPath path{{{0, 0}}};
    for (int i = 0; i < 12; ++i) {
      auto c = path.cells.back();
      switch (dir(rng)) {
        case 0: ++c.h; break;
        case 1: --c.h; break;
        case 2: ++c.v; break;
        default: --c.v; break;
      }
      path.cells.push_back(c);
    }
    RobotPose pose{0.5 + jitter(rng), 0.5 + jitter(rng), heading(rng)};
    TrackingStatus status;
    std::size_t ticks = 0;
    for (; ticks < 100000 && status.phase != TrackingPhase::kDone; ++ticks) {
      const auto before = status.waypoint_index;
      const auto out = control_step(pose, path, status, cfg, kCell, kCell);
      ASSERT_GE(out.status.waypoint_index, before);
      if (out.status.phase == TrackingPhase::kFar) {
        ASSERT_NEAR(std::hypot(out.command.vx, out.command.vz), cfg.k_p1, 1e-12);
      }
      status = out.status;
      pose = step_world(pose, out.command, 1.0 / 60.0);
    }
    EXPECT_EQ(status.phase, TrackingPhase::kDone) << "trial " << trial;
  }
}

TEST(Controller, ForCellsUsesHalfTheSmallerSide) {
  EXPECT_DOUBLE_EQ(ControllerConfig::for_cells(0.04, 0.02).arrival_radius, 0.01);
  EXPECT_EQ(to_string(TrackingPhase::kAligning), "ALIGNING");
}

}  // namespace
