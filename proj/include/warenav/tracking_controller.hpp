// Two-phase waypoint tracking over a planned cell path.
//
// FAR: drive at constant speed k_p1 towards the current cell centre while
// turning towards it with omega = k_p2 * e_theta. Once inside the arrival
// circle, ALIGNING: stop and rotate towards the next centre until the
// heading error is within [-beta, beta], then continue with the next cell.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string_view>

#include "warenav/errors.hpp"
#include "warenav/geometry.hpp"
#include "warenav/path_planner.hpp"
#include "warenav/robot_kinematics.hpp"

namespace warenav {

struct ControllerConfig {
  double k_p1 = 0.05;
  double k_p2 = 1.5;
  double arrival_radius = 0.01;
  double beta = 0.1;

  /// Defaults with the arrival radius set to half the smaller cell side.
  [[nodiscard]] static ControllerConfig for_cells(double cell_h, double cell_v) {
    ControllerConfig c;
    c.arrival_radius = 0.5 * std::min(cell_h, cell_v);
    return c;
  }

  void validate() const {
    if (!(k_p1 > 0.0) || !(k_p2 > 0.0) || !(arrival_radius > 0.0) || !(beta > 0.0) ||
        !(beta < std::numbers::pi / 2.0)) {
      throw Error(ErrorCode::kInvalidArgument, "invalid controller configuration");
    }
  }
};

enum class TrackingPhase { kFar, kAligning, kDone };

[[nodiscard]] constexpr std::string_view to_string(TrackingPhase p) {
  switch (p) {
    case TrackingPhase::kFar: return "FAR";
    case TrackingPhase::kAligning: return "ALIGNING";
    case TrackingPhase::kDone: return "DONE";
  }
  return "?";
}

struct TrackingStatus {
  TrackingPhase phase = TrackingPhase::kFar;
  std::size_t waypoint_index = 0;
  /// World offset to the active target and wrapped heading error.
  double e_x = 0.0;
  double e_z = 0.0;
  double e_theta = 0.0;
};

struct ControlOutput {
  BodyVelocity command;
  TrackingStatus status;
};

[[nodiscard]] inline Vec2 grid_center(const CellIndex& cell, double cell_h, double cell_v) {
  return {(cell.h + 0.5) * cell_h, (cell.v + 0.5) * cell_v};
}

[[nodiscard]] inline bool waypoint_reached(const RobotPose& pose, const Vec2& center,
                                           double radius) {
  return std::hypot(center.x() - pose.x, center.y() - pose.z) <= radius;
}

[[nodiscard]] inline ControlOutput control_step(const RobotPose& pose, const PlannedPath& path,
                                                TrackingStatus status,
                                                const ControllerConfig& cfg, double cell_h,
                                                double cell_v) {
  if (path.empty()) throw Error(ErrorCode::kNoPath, "no path to track");
  if (!std::isfinite(pose.x) || !std::isfinite(pose.z) || !std::isfinite(pose.theta)) {
    throw Error(ErrorCode::kInvalidEstimate, "pose estimate is not finite");
  }
  const std::size_t last = path.cells.size() - 1;
  status.waypoint_index = std::min(status.waypoint_index, last);

  // Each pass either returns or moves the phase machine forward, so the
  // loop is bounded by twice the path length.
  for (std::size_t guard = 0; guard <= 2 * path.cells.size() + 2; ++guard) {
    switch (status.phase) {
      case TrackingPhase::kDone:
        status.e_x = status.e_z = status.e_theta = 0.0;
        return {{}, status};

      case TrackingPhase::kFar: {
        const Vec2 target = grid_center(path.cells[status.waypoint_index], cell_h, cell_v);
        const double dx = target.x() - pose.x;
        const double dz = target.y() - pose.z;
        const double dist = std::hypot(dx, dz);
        if (dist <= cfg.arrival_radius) {
          status.phase =
              status.waypoint_index == last ? TrackingPhase::kDone : TrackingPhase::kAligning;
          continue;
        }
        status.e_x = dx;
        status.e_z = dz;
        status.e_theta = wrap_angle(bearing(dx, dz) - pose.theta);
        const Vec2 body = world_to_body(dx / dist, dz / dist, pose.theta) * cfg.k_p1;
        return {{body.x(), body.y(), cfg.k_p2 * status.e_theta}, status};
      }

      case TrackingPhase::kAligning: {
        const Vec2 next = grid_center(path.cells[status.waypoint_index + 1], cell_h, cell_v);
        const double dx = next.x() - pose.x;
        const double dz = next.y() - pose.z;
        status.e_x = dx;
        status.e_z = dz;
        status.e_theta = wrap_angle(bearing(dx, dz) - pose.theta);
        if (std::abs(status.e_theta) <= cfg.beta) {
          ++status.waypoint_index;
          status.phase = TrackingPhase::kFar;
          continue;
        }
        return {{0.0, 0.0, cfg.k_p2 * status.e_theta}, status};
      }
    }
  }
  throw Error(ErrorCode::kInternal, "controller phase machine did not settle");
}

/// Where the robot should be: its projection onto the path segment that
/// leads into the active waypoint.
[[nodiscard]] inline Vec2 expected_position(const RobotPose& pose, const PlannedPath& path,
                                            const TrackingStatus& status, double cell_h,
                                            double cell_v) {
  if (path.empty()) throw Error(ErrorCode::kNoPath, "no path");
  const std::size_t i = std::min(status.waypoint_index, path.cells.size() - 1);
  const Vec2 b = grid_center(path.cells[i], cell_h, cell_v);
  if (i == 0) return b;
  const Vec2 a = grid_center(path.cells[i - 1], cell_h, cell_v);
  const Vec2 ab = b - a;
  const double t = std::clamp((Vec2(pose.x, pose.z) - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return a + t * ab;
}

}  // namespace warenav
