// Transport-independent session logic behind the HTTP/WebSocket service.
//
// A Session owns one closed loop. Goals are queued and applied between
// ticks by whichever thread drives the loop. Subscribers receive JSON
// events through a small queue in which consecutive state or heartbeat
// events collapse to the latest one, so a slow reader never holds up the
// loop and always sees the freshest pose.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "warenav/errors.hpp"
#include "warenav/occupancy_map.hpp"
#include "warenav/path_planner.hpp"
#include "warenav/run_config.hpp"
#include "warenav/sim_harness.hpp"

namespace warenav {

enum class RunState { kIdle, kTracking, kDone, kError };

[[nodiscard]] constexpr const char* to_string(RunState s) {
  switch (s) {
    case RunState::kIdle: return "IDLE";
    case RunState::kTracking: return "TRACKING";
    case RunState::kDone: return "DONE";
    case RunState::kError: return "ERROR";
  }
  return "?";
}

[[nodiscard]] inline json error_json(ErrorCode code, const std::string& message) {
  return {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
}

[[nodiscard]] inline json error_json(const Error& e) { return error_json(e.code(), e.message()); }

// Map documents ---------------------------------------------------------------

/// Reachability as one row per v (ascending), each row a list of
/// alternating run lengths over h, starting with a reachable run that may
/// be empty.
[[nodiscard]] inline json encode_map_document(const ReachabilityGrid& grid, double cell_h,
                                              double cell_v, std::uint64_t version) {
  json rows = json::array();
  for (int v = grid.v_range().min; v <= grid.v_range().max; ++v) {
    json runs = json::array();
    bool current = true;
    int run = 0;
    for (int h = grid.h_range().min; h <= grid.h_range().max; ++h) {
      if (grid.reachable({h, v}) != current) {
        runs.push_back(run);
        current = !current;
        run = 0;
      }
      ++run;
    }
    runs.push_back(run);
    rows.push_back(std::move(runs));
  }
  return {{"version", version},
          {"cell_h", cell_h},
          {"cell_v", cell_v},
          {"h_min", grid.h_range().min},
          {"h_max", grid.h_range().max},
          {"v_min", grid.v_range().min},
          {"v_max", grid.v_range().max},
          {"rows", std::move(rows)}};
}

[[nodiscard]] inline json encode_map_document(const OccupancyGridMap& map, std::uint64_t version) {
  return encode_map_document(map.to_grid(), map.cell_h(), map.cell_v(), version);
}

struct MapDocument {
  ReachabilityGrid grid;
  double cell_h = 0.0;
  double cell_v = 0.0;
  std::uint64_t version = 0;
};

[[nodiscard]] inline MapDocument decode_map_document(const json& doc) {
  try {
    const IndexRange hr{doc.at("h_min").get<int>(), doc.at("h_max").get<int>()};
    const IndexRange vr{doc.at("v_min").get<int>(), doc.at("v_max").get<int>()};
    MapDocument out{ReachabilityGrid(hr, vr), doc.at("cell_h").get<double>(),
                    doc.at("cell_v").get<double>(), doc.at("version").get<std::uint64_t>()};
    const auto& rows = doc.at("rows");
    if (!rows.is_array() || static_cast<int>(rows.size()) != vr.cells()) {
      throw Error(ErrorCode::kParse, "row count does not match v range");
    }
    for (int r = 0; r < vr.cells(); ++r) {
      int h = hr.min;
      bool current = true;
      for (const auto& run : rows[static_cast<std::size_t>(r)]) {
        const int n = run.get<int>();
        if (n < 0 || h + n > hr.max + 1) throw Error(ErrorCode::kParse, "run overflows row");
        for (int k = 0; k < n; ++k, ++h) out.grid.set_reachable({h, vr.min + r}, current);
        current = !current;
      }
      if (h != hr.max + 1) throw Error(ErrorCode::kParse, "runs do not cover the row");
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

// Event delivery --------------------------------------------------------------

class EventQueue {
 public:
  /// Coalescable events replace a coalescable event still waiting at the back.
  void push(json event, bool coalescable) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      if (coalescable && !events_.empty() && events_.back().second) {
        events_.back().first = std::move(event);
        ++coalesced_;
      } else {
        events_.emplace_back(std::move(event), coalescable);
      }
    }
    cv_.notify_one();
  }

  /// Next event, or nullopt on timeout or once closed and drained.
  std::optional<json> pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !events_.empty(); });
    if (events_.empty()) return std::nullopt;
    json e = std::move(events_.front().first);
    events_.pop_front();
    return e;
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  [[nodiscard]] bool closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
  }
  [[nodiscard]] bool drained() const {
    std::lock_guard lock(mutex_);
    return closed_ && events_.empty();
  }
  [[nodiscard]] std::size_t coalesced() const {
    std::lock_guard lock(mutex_);
    return coalesced_;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::pair<json, bool>> events_;
  bool closed_ = false;
  std::size_t coalesced_ = 0;
};

// Sessions --------------------------------------------------------------------

struct PlanSummary {
  PlannedPath path;
  RunState run_state = RunState::kTracking;

  [[nodiscard]] json to_json() const {
    json cells = json::array();
    for (const auto& c : path.cells) cells.push_back({c.h, c.v});
    return {{"path", std::move(cells)}, {"cost", path.cost()}, {"run_state", to_string(run_state)}};
  }
};

class Session {
 public:
  static constexpr std::size_t kHeartbeatTicks = 15;

  Session(std::string id, const RunConfig& cfg)
      : id_(std::move(id)), cfg_(cfg), loop_(load_map_source(cfg.map), cfg.start, cfg.sim) {
    if (!loop_.map().contains(cfg.start) || !loop_.map().reachable(cfg.start)) {
      throw Error(ErrorCode::kInvalidArgument, "start cell must be a free map cell");
    }
    map_doc_ = encode_map_document(loop_.map(), map_version_).dump();
  }

  ~Session() { stop(); }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  [[nodiscard]] const std::string& id() const { return id_; }
  [[nodiscard]] const std::string& map_document() const { return map_doc_; }

  [[nodiscard]] RunState run_state() const {
    std::lock_guard lock(mutex_);
    return state_;
  }

  [[nodiscard]] json snapshot() const {
    std::lock_guard lock(mutex_);
    const RobotPose p = loop_.true_pose();
    json path = json::array();
    for (const auto& c : loop_.path().cells) path.push_back({c.h, c.v});
    return {{"id", id_},
            {"run_state", to_string(state_)},
            {"map_version", map_version_},
            {"t", static_cast<double>(loop_.ticks()) * cfg_.sim.dt},
            {"x_r", p.x},
            {"z_r", p.z},
            {"theta", p.theta},
            {"path", std::move(path)}};
  }

  /// Queues a goal. The future resolves after the next tick boundary with
  /// the plan or the reason it was refused.
  std::future<PlanSummary> submit_goal(const CellIndex& goal) {
    std::promise<PlanSummary> promise;
    auto fut = promise.get_future();
    {
      std::lock_guard lock(goal_mutex_);
      goals_.push_back({goal, std::move(promise)});
    }
    return fut;
  }

  /// Blocking goal submission. Drives the loop itself when no driver
  /// thread is running.
  PlanSummary set_goal(const CellIndex& goal,
                       std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    auto fut = submit_goal(goal);
    if (!running_) apply_goals();
    if (fut.wait_for(timeout) != std::future_status::ready) {
      throw Error(ErrorCode::kTimeout, "goal was not applied in time");
    }
    return fut.get();
  }

  /// Applies queued goals, then advances the loop by one tick and publishes.
  void step() {
    apply_goals();
    std::lock_guard lock(mutex_);
    TickRecord rec;
    try {
      rec = loop_.tick();
    } catch (const Error& e) {
      state_ = RunState::kError;
      loop_.clear_path();
      json ev = event_base("error", static_cast<double>(loop_.ticks()) * cfg_.sim.dt);
      ev.update(error_json(e));
      publish(std::move(ev), false);
      return;
    }
    if (state_ == RunState::kTracking) {
      episode_.push_back(rec);
      json ev = event_base("state", rec.t);
      ev.update({{"x_r", rec.x_r},
                 {"z_r", rec.z_r},
                 {"theta", rec.theta},
                 {"phase", std::string(to_string(rec.phase))},
                 {"waypoint_index", rec.waypoint},
                 {"x_e", rec.x_e},
                 {"z_e", rec.z_e}});
      publish(std::move(ev), true);
      if (loop_.done()) {
        state_ = RunState::kDone;
        const RmseTriple cam = rmse(episode_);
        const RmseTriple metric = rmse(episode_, cfg_.sim.scale.k_sh, cfg_.sim.scale.k_sv);
        json done = event_base("done", rec.t);
        done.update({{"ticks", episode_.size()},
                     {"rmse", {{"x", cam.x}, {"z", cam.z}, {"track", cam.track}}},
                     {"rmse_m", {{"x", metric.x}, {"z", metric.z}, {"track", metric.track}}}});
        publish(std::move(done), false);
      }
    } else if (loop_.ticks() % kHeartbeatTicks == 1) {
      json hb = event_base("heartbeat", rec.t);
      hb.update({{"x_r", rec.x_r}, {"z_r", rec.z_r}, {"theta", rec.theta}});
      publish(std::move(hb), true);
    }
  }

  std::shared_ptr<EventQueue> subscribe() {
    auto q = std::make_shared<EventQueue>();
    std::lock_guard lock(mutex_);
    if (closed_) {
      q->close();
    } else {
      subscribers_.push_back(q);
    }
    return q;
  }

  /// Runs the loop on a background thread at `rate` times real time.
  void start() {
    if (running_.exchange(true)) return;
    driver_ = std::thread([this] {
      const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(cfg_.sim.dt / cfg_.rate));
      auto next = std::chrono::steady_clock::now();
      std::unique_lock lock(stop_mutex_);
      while (!stop_requested_) {
        lock.unlock();
        step();
        lock.lock();
        next += period;
        stop_cv_.wait_until(lock, next, [&] { return stop_requested_; });
      }
    });
  }

  /// Stops the driver and ends every stream.
  void stop() {
    {
      std::lock_guard lock(stop_mutex_);
      stop_requested_ = true;
    }
    stop_cv_.notify_all();
    if (driver_.joinable()) driver_.join();
    running_ = false;
    fail_pending_goals();
    std::lock_guard lock(mutex_);
    closed_ = true;
    for (auto& q : subscribers_) q->close();
    subscribers_.clear();
  }

  [[nodiscard]] const OccupancyGridMap& map() const { return loop_.map(); }

 private:
  struct PendingGoal {
    CellIndex cell;
    std::promise<PlanSummary> promise;
  };

  json event_base(const char* type, double t) {
    return {{"type", type},
            {"seq", seq_++},
            {"t", t},
            {"run_state", to_string(state_)},
            {"map_version", map_version_}};
  }

  void publish(json event, bool coalescable) {
    std::erase_if(subscribers_, [](const auto& q) { return q->closed(); });
    for (auto& q : subscribers_) q->push(event, coalescable);
  }

  void apply_goals() {
    std::deque<PendingGoal> goals;
    {
      std::lock_guard lock(goal_mutex_);
      goals.swap(goals_);
    }
    if (goals.empty()) return;
    std::lock_guard lock(mutex_);
    for (auto& g : goals) {
      try {
        g.promise.set_value(plan_goal(g.cell));
      } catch (...) {
        g.promise.set_exception(std::current_exception());
      }
    }
  }

  PlanSummary plan_goal(const CellIndex& goal) {
    const auto& map = loop_.map();
    if (!map.contains(goal)) throw Error(ErrorCode::kRejected, "goal is outside the map");
    if (!map.reachable(goal)) throw Error(ErrorCode::kRejected, "goal cell is occupied");
    const CellIndex here = loop_.estimated_cell();
    if (!map.contains(here) || !map.reachable(here)) {
      throw Error(ErrorCode::kRejected, "robot is not localized in a free cell");
    }
    PlannedPath path = astar_search(here, goal, map);
    loop_.set_path(path);
    state_ = RunState::kTracking;
    episode_.clear();
    return {std::move(path), state_};
  }

  void fail_pending_goals() {
    std::lock_guard lock(goal_mutex_);
    for (auto& g : goals_) {
      g.promise.set_exception(
          std::make_exception_ptr(Error(ErrorCode::kUnknownSession, "session closed")));
    }
    goals_.clear();
  }

  std::string id_;
  RunConfig cfg_;

  mutable std::mutex mutex_;
  ClosedLoop loop_;
  RunState state_ = RunState::kIdle;
  std::uint64_t map_version_ = 1;
  std::uint64_t seq_ = 0;
  std::vector<TickRecord> episode_;
  std::vector<std::shared_ptr<EventQueue>> subscribers_;
  bool closed_ = false;
  std::string map_doc_;

  std::mutex goal_mutex_;
  std::deque<PendingGoal> goals_;

  std::atomic<bool> running_{false};
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  bool stop_requested_ = false;
  std::thread driver_;
};

class SessionRegistry {
 public:
  explicit SessionRegistry(RunConfig defaults = {}, bool autostart = true)
      : defaults_(std::move(defaults)), autostart_(autostart), rng_(std::random_device{}()) {}

  ~SessionRegistry() { close_all(); }

  /// Creates a session; `overrides` is a partial config applied on top of
  /// the registry defaults.
  std::shared_ptr<Session> create(const json& overrides = json::object()) {
    const RunConfig cfg = parse_run_config(overrides, defaults_);
    std::lock_guard lock(mutex_);
    std::string id;
    do {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
      id = buf;
    } while (sessions_.count(id));
    auto s = std::make_shared<Session>(id, cfg);
    sessions_.emplace(id, s);
    if (autostart_) s->start();
    return s;
  }

  [[nodiscard]] std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, "no session '" + id + "'");
    return it->second;
  }

  void close(const std::string& id) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mutex_);
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) {
        throw Error(ErrorCode::kUnknownSession, "no session '" + id + "'");
      }
      s = it->second;
      sessions_.erase(it);
    }
    s->stop();
  }

  void close_all() {
    std::map<std::string, std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(mutex_);
      all.swap(sessions_);
    }
    for (auto& [_, s] : all) s->stop();
  }

 private:
  RunConfig defaults_;
  bool autostart_;
  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace warenav
