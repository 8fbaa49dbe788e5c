// Timing comparison of the three planners on seeded random maps.

#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "warenav/errors.hpp"
#include "warenav/path_planner.hpp"

namespace warenav {

struct MapSize {
  int width = 0;
  int height = 0;
  [[nodiscard]] std::string label() const {
    return std::to_string(width) + "x" + std::to_string(height);
  }
};

enum class PlannerMethod { kAStarHeap, kAStarList, kDijkstra };

[[nodiscard]] inline const char* to_string(PlannerMethod m) {
  switch (m) {
    case PlannerMethod::kAStarHeap: return "astar_heap";
    case PlannerMethod::kAStarList: return "astar_list";
    case PlannerMethod::kDijkstra: return "dijkstra";
  }
  return "?";
}

[[nodiscard]] inline SearchOptions options_for(PlannerMethod m) {
  switch (m) {
    case PlannerMethod::kAStarHeap: return {OpenSetKind::kBinaryHeap, true, false};
    case PlannerMethod::kAStarList: return {OpenSetKind::kLinkedList, true, false};
    case PlannerMethod::kDijkstra: return {OpenSetKind::kLinkedList, false, false};
  }
  return {};
}

/// Uniform random occupancy with the given density; origin-anchored window.
[[nodiscard]] inline ReachabilityGrid random_grid(int width, int height, double density,
                                                  std::mt19937_64& rng) {
  auto grid = ReachabilityGrid::sized(width, height);
  std::bernoulli_distribution blocked(density);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (blocked(rng)) grid.set_reachable(grid.cell(i), false);
  }
  return grid;
}

/// 4-connected component label per cell, -1 for blocked cells.
[[nodiscard]] inline std::vector<int> component_labels(const ReachabilityGrid& grid) {
  std::vector<int> label(grid.size(), -1);
  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < grid.size(); ++seed) {
    if (!grid.reachable_linear(seed) || label[seed] >= 0) continue;
    label[seed] = next;
    queue.push_back(seed);
    while (!queue.empty()) {
      const CellIndex c = grid.cell(queue.front());
      queue.pop_front();
      for (const CellIndex n : {CellIndex{c.h + 1, c.v}, CellIndex{c.h - 1, c.v},
                                CellIndex{c.h, c.v + 1}, CellIndex{c.h, c.v - 1}}) {
        if (!grid.reachable(n)) continue;
        const std::size_t j = grid.linear(n);
        if (label[j] >= 0) continue;
        label[j] = next;
        queue.push_back(j);
      }
    }
    ++next;
  }
  return label;
}

/// Draws `count` distinct-endpoint pairs that share a connected component.
[[nodiscard]] inline std::vector<std::pair<CellIndex, CellIndex>> solvable_pairs(
    const ReachabilityGrid& grid, int count, std::mt19937_64& rng) {
  const auto label = component_labels(grid);
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::vector<std::pair<CellIndex, CellIndex>> out;
  while (static_cast<int>(out.size()) < count) {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    if (a == b || label[a] < 0 || label[a] != label[b]) continue;  // redraw
    out.emplace_back(grid.cell(a), grid.cell(b));
  }
  return out;
}

struct BenchmarkRow {
  MapSize size;
  PlannerMethod method = PlannerMethod::kAStarHeap;
  double mean_seconds = 0.0;
  int pairs = 0;
  double mean_cost = 0.0;
  double mean_expanded = 0.0;
};

/// For each map size, times every method over the same solvable random
/// start/end pairs and reports the mean wall time per search.
[[nodiscard]] inline std::vector<BenchmarkRow> benchmark_planners(
    const std::vector<MapSize>& sizes, int n_pairs, double obstacle_density,
    std::uint64_t seed) {
  if (n_pairs < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one pair");
  std::vector<BenchmarkRow> rows;
  std::mt19937_64 rng(seed);
  for (const auto& size : sizes) {
    const auto grid = random_grid(size.width, size.height, obstacle_density, rng);
    const auto pairs = solvable_pairs(grid, n_pairs, rng);
    std::vector<int> reference_cost;
    for (const auto method :
         {PlannerMethod::kAStarHeap, PlannerMethod::kAStarList, PlannerMethod::kDijkstra}) {
      BenchmarkRow row{size, method, 0.0, n_pairs, 0.0, 0.0};
      const auto options = options_for(method);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = plan(grid, pairs[k].first, pairs[k].second, options);
        const auto t1 = std::chrono::steady_clock::now();
        row.mean_seconds += std::chrono::duration<double>(t1 - t0).count();
        row.mean_cost += result.path.cost();
        row.mean_expanded += static_cast<double>(result.expanded);
        if (method == PlannerMethod::kAStarHeap) {
          reference_cost.push_back(result.path.cost());
        } else if (reference_cost[k] != result.path.cost()) {
          throw Error(ErrorCode::kInternal, "planners disagree on optimal cost");
        }
      }
      row.mean_seconds /= n_pairs;
      row.mean_cost /= n_pairs;
      row.mean_expanded /= n_pairs;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
  out << "map,method,mean_seconds,pairs,mean_cost,mean_expanded\n";
  for (const auto& r : rows) {
    out << r.size.label() << ',' << to_string(r.method) << ',' << r.mean_seconds << ','
        << r.pairs << ',' << r.mean_cost << ',' << r.mean_expanded << '\n';
  }
}

}  // namespace warenav
