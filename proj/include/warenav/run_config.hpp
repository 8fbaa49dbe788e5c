// JSON run configuration shared by the CLI and the service.
//
//   {
//     "seed": 1, "dt": 0.016666, "tick_budget": 20000, "rate": 1.0,
//     "noise": "default" | "off" | {"pose_std": .., "theta_std": .., ...},
//     "controller": {"k_p1": .., "k_p2": .., "arrival_radius": .., "beta": ..},
//     "scale": {"k_sh": .., "k_sv": ..},
//     "map": {"type": "warehouse", "width": 109, "height": 179}
//          | {"type": "corridor", "length": 10}
//          | {"type": "file", "path": "room.ogm"},
//     "start": [3, 3]
//   }
//
// Every key is optional. Unknown keys are rejected.

#pragma once

#include <fstream>
#include <set>
#include <string>

#include "json.hpp"

#include "warenav/errors.hpp"
#include "warenav/occupancy_map.hpp"
#include "warenav/sim_harness.hpp"

namespace warenav {

using nlohmann::json;

struct MapSource {
  std::string type = "warehouse";
  int width = 109;
  int height = 179;
  int length = 10;
  std::string path;
};

struct RunConfig {
  SimConfig sim;
  MapSource map;
  CellIndex start{3, 3};
  /// Simulated seconds per wall-clock second for the live service.
  double rate = 1.0;
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw Error(ErrorCode::kParse, std::string("unknown key '") + key + "' in " + where);
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

[[nodiscard]] inline RunConfig parse_run_config(const json& j, RunConfig cfg = {}) {
  detail::check_keys(j,
                     {"seed", "dt", "tick_budget", "rate", "noise", "controller", "scale", "map",
                      "start", "wheel_radius", "process_k", "initial_theta"},
                     "config");
  auto& s = cfg.sim;
  detail::read_opt(j, "seed", s.seed);
  detail::read_opt(j, "dt", s.dt);
  detail::read_opt(j, "tick_budget", s.tick_budget);
  detail::read_opt(j, "wheel_radius", s.wheel_radius);
  detail::read_opt(j, "process_k", s.process_k);
  detail::read_opt(j, "initial_theta", s.initial_theta);
  detail::read_opt(j, "rate", cfg.rate);

  if (j.contains("noise")) {
    const auto& n = j["noise"];
    if (n.is_string()) {
      if (n == "default") {
        s.noise = SimNoise{};
      } else if (n == "off") {
        s.noise = SimNoise::off();
      } else {
        throw Error(ErrorCode::kParse, "noise must be 'default', 'off' or an object");
      }
    } else {
      detail::check_keys(n, {"pose_std", "theta_std", "wheel_std", "actuation_std"}, "noise");
      detail::read_opt(n, "pose_std", s.noise.pose_std);
      detail::read_opt(n, "theta_std", s.noise.theta_std);
      detail::read_opt(n, "wheel_std", s.noise.wheel_std);
      detail::read_opt(n, "actuation_std", s.noise.actuation_std);
    }
  }
  if (j.contains("controller")) {
    const auto& c = j["controller"];
    detail::check_keys(c, {"k_p1", "k_p2", "arrival_radius", "beta"}, "controller");
    detail::read_opt(c, "k_p1", s.controller.k_p1);
    detail::read_opt(c, "k_p2", s.controller.k_p2);
    detail::read_opt(c, "arrival_radius", s.controller.arrival_radius);
    detail::read_opt(c, "beta", s.controller.beta);
  }
  if (j.contains("scale")) {
    const auto& k = j["scale"];
    detail::check_keys(k, {"k_sh", "k_sv"}, "scale");
    detail::read_opt(k, "k_sh", s.scale.k_sh);
    detail::read_opt(k, "k_sv", s.scale.k_sv);
  }
  if (j.contains("map")) {
    const auto& m = j["map"];
    detail::check_keys(m, {"type", "width", "height", "length", "path"}, "map");
    detail::read_opt(m, "type", cfg.map.type);
    detail::read_opt(m, "width", cfg.map.width);
    detail::read_opt(m, "height", cfg.map.height);
    detail::read_opt(m, "length", cfg.map.length);
    detail::read_opt(m, "path", cfg.map.path);
    if (cfg.map.type != "warehouse" && cfg.map.type != "corridor" && cfg.map.type != "file") {
      throw Error(ErrorCode::kParse, "map type must be warehouse, corridor or file");
    }
  }
  if (j.contains("start")) {
    const auto& st = j["start"];
    if (!st.is_array() || st.size() != 2 || !st[0].is_number_integer() ||
        !st[1].is_number_integer()) {
      throw Error(ErrorCode::kParse, "start must be [h, v]");
    }
    cfg.start = {st[0].get<int>(), st[1].get<int>()};
  }

  s.noise.validate();
  s.controller.validate();
  if (!(s.dt > 0.0) || s.tick_budget == 0 || !(s.wheel_radius > 0.0) || !(s.process_k > 0.0) ||
      !(cfg.rate > 0.0) || !(s.scale.k_sh > 0.0) || !(s.scale.k_sv > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "config values out of range");
  }
  return cfg;
}

[[nodiscard]] inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return parse_run_config(j);
}

[[nodiscard]] inline OccupancyGridMap load_map_source(const MapSource& src) {
  if (src.type == "corridor") return corridor_map(src.length);
  if (src.type == "file") {
    std::ifstream in(src.path);
    if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open map " + src.path);
    return read_map(in);
  }
  return warehouse_map(src.width, src.height);
}

}  // namespace warenav
