// Command-line front end: planning, benchmarking, mapping, simulation,
// calibration and the live service.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "warenav/control_service.hpp"
#include "warenav/occupancy_map.hpp"
#include "warenav/path_planner.hpp"
#include "warenav/planner_benchmark.hpp"
#include "warenav/run_config.hpp"
#include "warenav/service_server.hpp"
#include "warenav/sim_harness.hpp"

namespace {

using namespace warenav;

CellIndex parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(ErrorCode::kParse, "cell must be h,v");
  return {detail::parse_int(text.substr(0, comma)), detail::parse_int(text.substr(comma + 1))};
}

std::vector<MapSize> parse_sizes(const std::string& text) {
  std::vector<MapSize> sizes;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    const auto x = tok.find('x');
    if (x == std::string::npos) throw Error(ErrorCode::kParse, "size must be WxH");
    sizes.push_back({detail::parse_int(tok.substr(0, x)), detail::parse_int(tok.substr(x + 1))});
    if (sizes.back().width < 2 || sizes.back().height < 2) {
      throw Error(ErrorCode::kInvalidArgument, "map sizes must be at least 2x2");
    }
  }
  return sizes;
}

OccupancyGridMap load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open map " + path);
  return read_map(in);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  return out;
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Warehouse robot navigation tools"};
  app.require_subcommand(1);

  // plan
  std::string map_path, start_text, end_text, open_set = "heap";
  auto* plan_cmd = app.add_subcommand("plan", "Shortest 4-connected path on a map");
  plan_cmd->add_option("--map", map_path, "Map file")->required();
  plan_cmd->add_option("--start", start_text, "Start cell h,v")->required();
  plan_cmd->add_option("--end", end_text, "End cell h,v")->required();
  plan_cmd->add_option("--open-set", open_set, "heap or list")
      ->check(CLI::IsMember({"heap", "list"}));

  // bench
  std::string sizes_text = "168x120,336x240,672x480", bench_out;
  int pairs = 50;
  std::uint64_t bench_seed = 42;
  double density = 0.25;
  auto* bench_cmd = app.add_subcommand("bench", "Time the planners on random maps");
  bench_cmd->add_option("--sizes", sizes_text, "Comma-separated WxH list");
  bench_cmd->add_option("--pairs", pairs, "Start/end pairs per size")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench_seed, "Random seed");
  bench_cmd->add_option("--density", density, "Obstacle density")->check(CLI::Range(0.0, 0.9));
  bench_cmd->add_option("--out", bench_out, "CSV output (default stdout)");

  // build-map
  std::string cloud_path, map_out;
  double cell_h = 0.02, cell_v = 0.02;
  int threshold = 200;
  auto* build_cmd = app.add_subcommand("build-map", "Occupancy grid from an x y z point cloud");
  build_cmd->add_option("--cloud", cloud_path, "Point cloud file")->required();
  build_cmd->add_option("--cell-h", cell_h, "Horizontal cell size")->check(CLI::PositiveNumber);
  build_cmd->add_option("--cell-v", cell_v, "Vertical cell size")->check(CLI::PositiveNumber);
  build_cmd->add_option("--threshold", threshold, "Points above which a cell is blocked")
      ->check(CLI::NonNegativeNumber);
  build_cmd->add_option("--out", map_out, "Map output")->required();

  // map-stats
  double k_sh = 0.2921, k_sv = 0.2628;
  auto* stats_cmd = app.add_subcommand("map-stats", "Real-world extent of a map");
  stats_cmd->add_option("--map", map_path, "Map file")->required();
  stats_cmd->add_option("--k-sh", k_sh, "Horizontal scale factor")->check(CLI::PositiveNumber);
  stats_cmd->add_option("--k-sv", k_sv, "Vertical scale factor")->check(CLI::PositiveNumber);

  // synth-map
  std::string synth_type = "warehouse";
  int width = 109, height = 179, length = 10;
  auto* synth_cmd = app.add_subcommand("synth-map", "Write a synthetic test map");
  synth_cmd->add_option("--type", synth_type, "warehouse or corridor")
      ->check(CLI::IsMember({"warehouse", "corridor"}));
  synth_cmd->add_option("--width", width, "Warehouse width in cells");
  synth_cmd->add_option("--height", height, "Warehouse height in cells");
  synth_cmd->add_option("--length", length, "Corridor length in cells");
  synth_cmd->add_option("--out", map_out, "Map output")->required();

  // simulate
  std::string goal_text, noise = "default", episode_out, trace_out, config_path;
  std::uint64_t sim_seed = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one closed-loop episode");
  sim_cmd->add_option("--map", map_path, "Map file")->required();
  sim_cmd->add_option("--start", start_text, "Start cell h,v")->required();
  sim_cmd->add_option("--goal", goal_text, "Goal cell h,v")->required();
  sim_cmd->add_option("--seed", sim_seed, "Random seed");
  sim_cmd->add_option("--noise", noise, "default or off")->check(CLI::IsMember({"default", "off"}));
  sim_cmd->add_option("--config", config_path, "JSON run config");
  sim_cmd->add_option("--out", episode_out, "Episode CSV")->required();
  sim_cmd->add_option("--trace", trace_out, "Filter trace CSV");

  // calibrate
  std::string pairs_path;
  auto* cal_cmd = app.add_subcommand("calibrate", "Scale factor from real,measured pairs");
  cal_cmd->add_option("--pairs", pairs_path, "CSV of real,measured distances")->required();

  // rmse
  std::string episode_in;
  bool metric = false;
  auto* rmse_cmd = app.add_subcommand("rmse", "Tracking error of an episode CSV");
  rmse_cmd->add_option("--episode", episode_in, "Episode CSV")->required();
  rmse_cmd->add_flag("--metric", metric, "Convert to metres with the scale factors");
  rmse_cmd->add_option("--k-sh", k_sh, "Horizontal scale factor")->check(CLI::PositiveNumber);
  rmse_cmd->add_option("--k-sv", k_sv, "Vertical scale factor")->check(CLI::PositiveNumber);

  // serve
  auto* serve_cmd = app.add_subcommand(
      "serve", "HTTP + WebSocket control service (bind address from WARENAV_BIND)");
  serve_cmd->add_option("--config", config_path, "JSON run config for new sessions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan_cmd) {
      const auto map = load_map(map_path);
      const auto kind = open_set == "heap" ? OpenSetKind::kBinaryHeap : OpenSetKind::kLinkedList;
      const auto path = astar_search(parse_cell(start_text), parse_cell(end_text), map, kind);
      for (const auto& c : path.cells) std::cout << c.h << ' ' << c.v << '\n';
    } else if (*bench_cmd) {
      const auto rows = benchmark_planners(parse_sizes(sizes_text), pairs, density, bench_seed);
      if (bench_out.empty()) {
        write_benchmark_csv(std::cout, rows);
      } else {
        auto out = open_out(bench_out);
        write_benchmark_csv(out, rows);
      }
    } else if (*build_cmd) {
      std::ifstream in(cloud_path);
      if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open cloud " + cloud_path);
      const auto cloud = read_point_cloud(in);
      const auto raster = rasterize(project_to_plane(cloud), cell_h, cell_v);
      auto out = open_out(map_out);
      write_map(out, threshold_occupancy(raster, cell_h, cell_v, threshold));
    } else if (*stats_cmd) {
      const auto s = map_stats(load_map(map_path), k_sh, k_sv);
      std::printf("length_m %.6g\nwidth_m %.6g\nratio %.6g\n", s.length_m, s.width_m, s.ratio);
    } else if (*synth_cmd) {
      auto out = open_out(map_out);
      write_map(out, synth_type == "corridor" ? corridor_map(length) : warehouse_map(width, height));
    } else if (*sim_cmd) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      cfg.sim.seed = sim_seed;
      if (noise == "off") cfg.sim.noise = SimNoise::off();
      const auto map = load_map(map_path);
      EpisodeLog log;
      int status = 0;
      try {
        log = run_episode(map, parse_cell(start_text), parse_cell(goal_text), cfg.sim);
      } catch (const EpisodeTimeout& e) {
        std::cerr << e.what() << '\n';
        log = e.partial_log();
        status = 3;
      }
      {
        auto out = open_out(episode_out);
        write_episode_csv(out, log);
      }
      if (!trace_out.empty()) {
        auto out = open_out(trace_out);
        write_filter_trace_csv(out, log);
      }
      const auto r = rmse(log);
      const auto m = metric_rmse(log, cfg.sim.scale);
      std::printf("ticks %zu\npath_cells %zu\ndone %d\n", log.ticks.size(), log.path.cells.size(),
                  log.done ? 1 : 0);
      std::printf("rmse_x %.9g\nrmse_z %.9g\nrmse_track %.9g\n", r.x, r.z, r.track);
      std::printf("rmse_x_m %.9g\nrmse_z_m %.9g\nrmse_track_m %.9g\n", m.x, m.z, m.track);
      return status;
    } else if (*cal_cmd) {
      std::ifstream in(pairs_path);
      if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + pairs_path);
      std::printf("k_s %.12g\n", calibrate_scale(read_calibration_pairs(in)));
    } else if (*rmse_cmd) {
      std::ifstream in(episode_in);
      if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + episode_in);
      const auto log = read_episode_csv(in);
      const auto r = metric ? rmse(log.ticks, k_sh, k_sv) : rmse(log.ticks);
      std::printf("rmse_x %.17g\nrmse_z %.17g\nrmse_track %.17g\n", r.x, r.z, r.track);
    } else if (*serve_cmd) {
      const RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      SessionRegistry registry(cfg);
      ServiceServer server(registry);
      const auto addr = bind_address_from_env();
      const auto port = server.start(addr);
      std::printf("listening on %s:%u\n", addr.host.c_str(), port);
      std::fflush(stdout);
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      registry.close_all();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument || e.code() == ErrorCode::kParse ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
