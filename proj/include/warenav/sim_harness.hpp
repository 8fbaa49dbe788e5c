// Closed-loop kinematic simulation: noisy sensing, filtering, tracking and
// Euler integration at the camera rate, plus scale calibration and RMSE.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "warenav/errors.hpp"
#include "warenav/occupancy_map.hpp"
#include "warenav/path_planner.hpp"
#include "warenav/robot_kinematics.hpp"
#include "warenav/state_estimation.hpp"
#include "warenav/tracking_controller.hpp"

namespace warenav {

struct SimNoise {
  double pose_std = 0.005;   // x, z measurement
  double theta_std = 0.01;   // heading measurement, rad
  double wheel_std = 0.002;  // per encoder sample
  double actuation_std = 0.0;

  [[nodiscard]] static SimNoise off() { return {0.0, 0.0, 0.0, 0.0}; }

  void validate() const {
    if (!(pose_std >= 0.0) || !(theta_std >= 0.0) || !(wheel_std >= 0.0) ||
        !(actuation_std >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "noise std-devs must be >= 0");
    }
  }
};

struct SimWorld {
  RobotPose pose;
  OccupancyGridMap map;
  double dt = 1.0 / 60.0;
  SimNoise noise;
};

/// Euler step of (x, z, theta) under a body-frame command. Actuation noise,
/// when enabled, perturbs each command channel before integration.
[[nodiscard]] inline RobotPose step_world(const RobotPose& pose, BodyVelocity cmd, double dt,
                                          double actuation_std = 0.0,
                                          std::mt19937_64* rng = nullptr) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
  if (!std::isfinite(cmd.vx) || !std::isfinite(cmd.vz) || !std::isfinite(cmd.omega)) {
    throw Error(ErrorCode::kInvalidArgument, "command is not finite");
  }
  if (actuation_std > 0.0 && rng) {
    std::normal_distribution<double> n(0.0, actuation_std);
    cmd.vx += n(*rng);
    cmd.vz += n(*rng);
    cmd.omega += n(*rng);
  }
  const Vec2 w = body_to_world(cmd.vx, cmd.vz, pose.theta);
  return {pose.x + w.x() * dt, pose.z + w.y() * dt, wrap_angle(pose.theta + cmd.omega * dt)};
}

inline void step_world(SimWorld& world, const BodyVelocity& cmd, std::mt19937_64* rng = nullptr) {
  world.pose = step_world(world.pose, cmd, world.dt, world.noise.actuation_std, rng);
}

/// Least-squares slope through the origin of measured against real
/// distance. Pairs are (real, measured).
[[nodiscard]] inline double calibrate_scale(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kInsufficientData, "no calibration pairs");
  double num = 0.0;
  double den = 0.0;
  for (const auto& [d, m] : pairs) {
    if (!std::isfinite(d) || !std::isfinite(m) || d < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "calibration distances must be finite and >= 0");
    }
    num += m * d;
    den += d * d;
  }
  if (den == 0.0) throw Error(ErrorCode::kCalibration, "all calibration distances are zero");
  const double k = num / den;
  if (!(k > 0.0)) throw Error(ErrorCode::kCalibration, "non-positive scale factor");
  return k;
}

struct ScaleCalibration {
  double k_sh = 0.2921;
  double k_sv = 0.2628;
};

/// Reads `real,measured` rows; a non-numeric first line is a header.
[[nodiscard]] inline std::vector<std::pair<double, double>> read_calibration_pairs(
    std::istream& in) {
  std::vector<std::pair<double, double>> pairs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::kParse, "expected real,measured");
    try {
      pairs.emplace_back(detail::parse_double(line.substr(0, comma)),
                         detail::parse_double(line.substr(comma + 1)));
    } catch (const Error&) {
      if (!first) throw;
    }
    first = false;
  }
  return pairs;
}

struct TickRecord {
  double t = 0.0;
  TrackingPhase phase = TrackingPhase::kFar;
  std::size_t waypoint = 0;
  double x_e = 0.0;
  double z_e = 0.0;
  double x_r = 0.0;
  double z_r = 0.0;
  double theta = 0.0;
  BodyVelocity command;
  Vec6 filter_mean = Vec6::Zero();
  Vec6 filter_variance = Vec6::Zero();
  Vec6 measurement = Vec6::Zero();
};

struct EpisodeLog {
  PlannedPath path;
  std::vector<TickRecord> ticks;
  bool done = false;
};

struct RmseTriple {
  double x = 0.0;
  double z = 0.0;
  double track = 0.0;
};

/// Root-mean-square deviation of real from expected position, per axis and
/// Euclidean, in the log's own units.
[[nodiscard]] inline RmseTriple rmse(const std::vector<TickRecord>& ticks, double scale_x = 1.0,
                                     double scale_z = 1.0) {
  if (ticks.empty()) throw Error(ErrorCode::kEmptyLog, "empty episode log");
  if (!(scale_x > 0.0) || !(scale_z > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scale factors must be positive");
  }
  double sx = 0.0;
  double sz = 0.0;
  for (const auto& r : ticks) {
    const double dx = (r.x_r - r.x_e) / scale_x;
    const double dz = (r.z_r - r.z_e) / scale_z;
    sx += dx * dx;
    sz += dz * dz;
  }
  const double n = static_cast<double>(ticks.size());
  return {std::sqrt(sx / n), std::sqrt(sz / n), std::sqrt((sx + sz) / n)};
}

[[nodiscard]] inline RmseTriple rmse(const EpisodeLog& log) { return rmse(log.ticks); }

/// Camera-scale log converted to metres: x by k_sh, z by k_sv.
[[nodiscard]] inline RmseTriple metric_rmse(const EpisodeLog& log, const ScaleCalibration& k) {
  return rmse(log.ticks, k.k_sh, k.k_sv);
}

struct SimConfig {
  SimNoise noise;
  ControllerConfig controller = ControllerConfig::for_cells(0.02, 0.02);
  double wheel_radius = kDefaultWheelRadius;
  double dt = 1.0 / 60.0;
  int encoder_rate_hz = 1000;
  double process_k = 0.1;
  std::uint64_t seed = 1;
  std::size_t tick_budget = 20000;
  double initial_theta = 0.0;
  ScaleCalibration scale;
};

/// Measurement covariance matching the simulated sensors. Wheel noise is
/// averaged over the encoder samples of one tick and propagated through
/// the inverse kinematics. A small floor keeps the noise-free case regular.
[[nodiscard]] inline Mat6 sim_measurement_covariance(const SimConfig& cfg) {
  const double samples = std::max(1.0, std::round(cfg.encoder_rate_hz * cfg.dt));
  const double w2 = cfg.noise.wheel_std * cfg.noise.wheel_std / samples;
  const double l = cfg.wheel_radius;
  constexpr double kFloor = 1e-12;
  Vec6 d;
  d << cfg.noise.pose_std * cfg.noise.pose_std, 2.0 / 3.0 * w2,
      cfg.noise.pose_std * cfg.noise.pose_std, 2.0 / 3.0 * w2,
      cfg.noise.theta_std * cfg.noise.theta_std, w2 / (3.0 * l * l);
  return (d.array() + kFloor).matrix().asDiagonal();
}

/// One simulated control loop. Also drives the live service, which calls
/// tick() from its own thread and may swap the path between ticks.
class ClosedLoop {
 public:
  ClosedLoop(const OccupancyGridMap& map, const CellIndex& start, const SimConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed) {
    cfg_.noise.validate();
    cfg_.controller.validate();
    if (!(cfg_.dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be positive");
    const Vec2 c = grid_center(start, map.cell_h(), map.cell_v());
    world_.map = map;
    world_.dt = cfg_.dt;
    world_.noise = cfg_.noise;
    world_.pose = {c.x(), c.y(), wrap_angle(cfg_.initial_theta)};

    NoiseConfig nc;
    nc.k1 = nc.k2 = nc.k3 = cfg_.process_k;
    nc.period = cfg_.dt;
    nc.measurement_covariance = sim_measurement_covariance(cfg_);
    FilterState init;
    init.mean << world_.pose.x, 0.0, world_.pose.z, 0.0, world_.pose.theta, 0.0;
    init.covariance = nc.measurement_covariance;
    filter_.emplace(nc, init);
  }

  void set_path(PlannedPath path) {
    if (path.empty()) throw Error(ErrorCode::kNoPath, "empty path");
    path_ = std::move(path);
    status_ = {};
  }
  void clear_path() {
    path_ = {};
    status_ = {};
  }

  /// Sense, filter, control, integrate. Returns the record for this tick.
  TickRecord tick() {
    const Vec6 z = measure();
    const FilterState& est = filter_->step(z);
    const RobotPose estimate = est.pose();

    TickRecord rec;
    rec.t = static_cast<double>(ticks_) * cfg_.dt;
    rec.x_r = world_.pose.x;
    rec.z_r = world_.pose.z;
    rec.theta = world_.pose.theta;
    rec.measurement = z;
    rec.filter_mean = est.mean;
    rec.filter_variance = est.covariance.diagonal();

    BodyVelocity cmd;
    if (!path_.empty()) {
      const auto out =
          control_step(estimate, path_, status_, cfg_.controller, map().cell_h(), map().cell_v());
      cmd = out.command;
      status_ = out.status;
      const Vec2 pe = expected_position(world_.pose, path_, status_, map().cell_h(),
                                        map().cell_v());
      rec.x_e = pe.x();
      rec.z_e = pe.y();
    } else {
      rec.x_e = world_.pose.x;
      rec.z_e = world_.pose.z;
    }
    rec.phase = status_.phase;
    rec.waypoint = status_.waypoint_index;
    rec.command = cmd;

    executed_ = cmd;
    step_world(world_, cmd, &rng_);
    ++ticks_;
    return rec;
  }

  [[nodiscard]] const RobotPose& true_pose() const { return world_.pose; }
  [[nodiscard]] RobotPose estimated_pose() const { return filter_->state().pose(); }
  [[nodiscard]] const FilterState& filter_state() const { return filter_->state(); }
  [[nodiscard]] const OccupancyGridMap& map() const { return world_.map; }
  [[nodiscard]] const PlannedPath& path() const { return path_; }
  [[nodiscard]] const TrackingStatus& status() const { return status_; }
  [[nodiscard]] const SimConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t ticks() const { return ticks_; }
  [[nodiscard]] bool done() const {
    return !path_.empty() && status_.phase == TrackingPhase::kDone;
  }

  /// Cell containing the current position estimate.
  [[nodiscard]] CellIndex estimated_cell() const {
    const RobotPose p = estimated_pose();
    return cell_of({p.x, p.z}, map().cell_h(), map().cell_v());
  }

 private:
  // Pose channels are truth plus noise. Velocity channels come from
  // averaged encoder samples of the executed command, mapped through the
  // inverse kinematics and rotated by the predicted heading.
  Vec6 measure() {
    std::normal_distribution<double> unit(0.0, 1.0);
    const auto samples =
        static_cast<int>(std::max(1.0, std::round(cfg_.encoder_rate_hz * cfg_.dt)));
    const WheelSpeeds truth = wheel_speeds(executed_, cfg_.wheel_radius);
    WheelSpeeds avg;
    for (int i = 0; i < samples; ++i) {
      avg.v1 += truth.v1 + cfg_.noise.wheel_std * unit(rng_);
      avg.v2 += truth.v2 + cfg_.noise.wheel_std * unit(rng_);
      avg.v3 += truth.v3 + cfg_.noise.wheel_std * unit(rng_);
    }
    avg.v1 /= samples;
    avg.v2 /= samples;
    avg.v3 /= samples;
    const BodyVelocity body = body_velocity_from_wheels(avg, cfg_.wheel_radius);
    const double heading = filter_->state().mean[state_index::kTheta] +
                           cfg_.dt * filter_->state().mean[state_index::kOmega];
    const Vec2 vel = body_to_world(body.vx, body.vz, heading);

    Vec6 z;
    z << world_.pose.x + cfg_.noise.pose_std * unit(rng_), vel.x(),
        world_.pose.z + cfg_.noise.pose_std * unit(rng_), vel.y(),
        wrap_angle(world_.pose.theta + cfg_.noise.theta_std * unit(rng_)), body.omega;
    // Keep the heading measurement on the same branch as the estimate.
    const double ref = filter_->state().mean[state_index::kTheta];
    z[state_index::kTheta] = ref + wrap_angle(z[state_index::kTheta] - ref);
    return z;
  }

  SimConfig cfg_;
  std::mt19937_64 rng_;
  SimWorld world_;
  std::optional<RobotStateFilter> filter_;
  PlannedPath path_;
  TrackingStatus status_;
  BodyVelocity executed_;
  std::size_t ticks_ = 0;
};

class EpisodeTimeout : public Error {
 public:
  EpisodeTimeout(EpisodeLog partial)
      : Error(ErrorCode::kTimeout, "tick budget exhausted"), log_(std::move(partial)) {}
  [[nodiscard]] const EpisodeLog& partial_log() const { return log_; }

 private:
  EpisodeLog log_;
};

/// Plans start to goal, then runs the loop until DONE or the tick budget.
[[nodiscard]] inline EpisodeLog run_episode(const OccupancyGridMap& map, const CellIndex& start,
                                            const CellIndex& goal, const SimConfig& cfg) {
  EpisodeLog log;
  log.path = astar_search(start, goal, map);
  ClosedLoop loop(map, start, cfg);
  loop.set_path(log.path);
  while (log.ticks.size() < cfg.tick_budget) {
    log.ticks.push_back(loop.tick());
    if (loop.done()) {
      log.done = true;
      return log;
    }
  }
  throw EpisodeTimeout(std::move(log));
}

inline void write_episode_csv(std::ostream& out, const EpisodeLog& log) {
  out << "t,phase,waypoint,x_e,z_e,x_r,z_r,theta,cmd_vx,cmd_vz,cmd_w\n";
  char buf[512];
  for (const auto& r : log.ticks) {
    std::snprintf(buf, sizeof buf, "%.17g,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.t, std::string(to_string(r.phase)).c_str(), r.waypoint, r.x_e, r.z_e, r.x_r,
                  r.z_r, r.theta, r.command.vx, r.command.vz, r.command.omega);
    out << buf;
  }
}

inline void write_filter_trace_csv(std::ostream& out, const EpisodeLog& log) {
  out << "t";
  for (const char* p : {"mu", "sig", "z"}) {
    for (int i = 0; i < 6; ++i) out << ',' << p << i;
  }
  out << '\n';
  char buf[64];
  for (const auto& r : log.ticks) {
    std::snprintf(buf, sizeof buf, "%.17g", r.t);
    out << buf;
    for (const Vec6* v : {&r.filter_mean, &r.filter_variance, &r.measurement}) {
      for (int i = 0; i < 6; ++i) {
        std::snprintf(buf, sizeof buf, ",%.17g", (*v)[i]);
        out << buf;
      }
    }
    out << '\n';
  }
}

[[nodiscard]] inline TrackingPhase parse_phase(const std::string& s) {
  if (s == "FAR") return TrackingPhase::kFar;
  if (s == "ALIGNING") return TrackingPhase::kAligning;
  if (s == "DONE") return TrackingPhase::kDone;
  throw Error(ErrorCode::kParse, "unknown phase '" + s + "'");
}

/// Reads an episode CSV written by write_episode_csv (filter columns are
/// not part of that format and stay zero).
[[nodiscard]] inline EpisodeLog read_episode_csv(std::istream& in) {
  EpisodeLog log;
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,phase,waypoint", 0) != 0) {
    throw Error(ErrorCode::kParse, "missing episode header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() != 11) throw Error(ErrorCode::kParse, "episode row needs 11 fields");
    TickRecord r;
    r.t = detail::parse_double(f[0]);
    r.phase = parse_phase(f[1]);
    r.waypoint = static_cast<std::size_t>(detail::parse_int(f[2]));
    r.x_e = detail::parse_double(f[3]);
    r.z_e = detail::parse_double(f[4]);
    r.x_r = detail::parse_double(f[5]);
    r.z_r = detail::parse_double(f[6]);
    r.theta = detail::parse_double(f[7]);
    r.command = {detail::parse_double(f[8]), detail::parse_double(f[9]),
                 detail::parse_double(f[10])};
    if (!log.ticks.empty() && r.t < log.ticks.back().t) {
      throw Error(ErrorCode::kParse, "timestamps must be monotone");
    }
    log.ticks.push_back(r);
  }
  log.done = !log.ticks.empty() && log.ticks.back().phase == TrackingPhase::kDone;
  return log;
}

// Synthetic maps ------------------------------------------------------------

/// A straight corridor `length` cells long along +h at v = 0, walled on
/// both sides and at the ends.
[[nodiscard]] inline OccupancyGridMap corridor_map(int length, double cell = 0.02,
                                                   int threshold = 200) {
  if (length < 1) throw Error(ErrorCode::kInvalidArgument, "corridor needs at least one cell");
  OccupancyGridMap map(cell, cell, threshold, {-1, length}, {-1, 1});
  for (int h = -1; h <= length; ++h) {
    map.block({h, -1});
    map.block({h, 1});
  }
  map.block({-1, 0});
  map.block({length, 0});
  return map;
}

/// Warehouse-like room: perimeter wall and rows of shelving with aisles,
/// occupying cells [0, width) x [0, height).
[[nodiscard]] inline OccupancyGridMap warehouse_map(int width, int height, double cell = 0.02,
                                                    int threshold = 200) {
  if (width < 12 || height < 12) throw Error(ErrorCode::kInvalidArgument, "room too small");
  OccupancyGridMap map(cell, cell, threshold, {0, width - 1}, {0, height - 1});
  for (int h = 0; h < width; ++h) {
    map.block({h, 0});
    map.block({h, height - 1});
  }
  for (int v = 0; v < height; ++v) {
    map.block({0, v});
    map.block({width - 1, v});
  }
  // Shelf rows four cells deep every twelve rows, broken by a cross aisle
  // in the middle and open at alternating ends.
  const int aisle_lo = width / 2 - 3;
  const int aisle_hi = width / 2 + 3;
  int row = 0;
  for (int v0 = 10; v0 + 4 < height - 8; v0 += 12, ++row) {
    const int h_begin = row % 2 == 0 ? 8 : 1;
    const int h_end = row % 2 == 0 ? width - 1 : width - 9;
    for (int v = v0; v < v0 + 4; ++v) {
      for (int h = h_begin; h < h_end; ++h) {
        if (h >= aisle_lo && h <= aisle_hi) continue;
        map.block({h, v});
      }
    }
  }
  return map;
}

}  // namespace warenav
