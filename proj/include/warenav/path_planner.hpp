// Grid path planning: A* with a binary-heap or linked-list open set, and
// Dijkstra as the uninformed baseline. 4-connected, unit move cost.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <iterator>
#include <list>
#include <optional>
#include <unordered_set>
#include <vector>

#include "warenav/binary_heap.hpp"
#include "warenav/errors.hpp"
#include "warenav/occupancy_map.hpp"

namespace warenav {

enum class OpenSetKind { kBinaryHeap, kLinkedList };

[[nodiscard]] inline int manhattan(const CellIndex& a, const CellIndex& b) {
  return std::abs(a.h - b.h) + std::abs(a.v - b.v);
}

struct GridNode {
  CellIndex cell;
  int g = 0;
  int f = 0;
  std::int32_t father = -1;
};

struct PlannedPath {
  std::vector<CellIndex> cells;
  [[nodiscard]] int cost() const { return static_cast<int>(cells.size()) - 1; }
  [[nodiscard]] bool empty() const { return cells.empty(); }
};

struct SearchOptions {
  OpenSetKind open_set = OpenSetKind::kBinaryHeap;
  bool use_heuristic = true;
  /// Record every expanded cell, in order (for tests and visualisation).
  bool record_expansions = false;
};

struct SearchResult {
  PlannedPath path;
  std::size_t expanded = 0;
  std::size_t pushed = 0;
  std::vector<CellIndex> expansion_order;
};

/// Father links of a finished search, indexed by grid linear index.
struct SearchTree {
  const ReachabilityGrid* grid = nullptr;
  std::vector<GridNode> nodes;
};

/// Walks father links back from `end` and returns the start-to-end path.
[[nodiscard]] inline PlannedPath reconstruct_path(const SearchTree& tree, const CellIndex& end) {
  PlannedPath path;
  if (!tree.grid || !tree.grid->contains(end)) {
    throw Error(ErrorCode::kInternal, "path end outside search tree");
  }
  std::int32_t at = static_cast<std::int32_t>(tree.grid->linear(end));
  const std::size_t limit = tree.nodes.size();
  while (at >= 0) {
    if (path.cells.size() > limit) throw Error(ErrorCode::kInternal, "cyclic father chain");
    if (static_cast<std::size_t>(at) >= limit) {
      throw Error(ErrorCode::kInternal, "father link outside search tree");
    }
    path.cells.push_back(tree.nodes[static_cast<std::size_t>(at)].cell);
    at = tree.nodes[static_cast<std::size_t>(at)].father;
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

namespace detail {

struct OpenEntry {
  int f;
  int g;
  std::uint64_t seq;
  std::uint32_t node;
};

// Lower f first, then deeper (higher g), then first inserted.
struct EntryBefore {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.f != b.f) return a.f < b.f;
    if (a.g != b.g) return a.g > b.g;
    return a.seq < b.seq;
  }
};

// Heap open set. Superseded entries stay in the heap and are skipped when
// popped (their g no longer matches the node record).
class HeapOpenSet {
 public:
  explicit HeapOpenSet(std::size_t) {}
  [[nodiscard]] bool empty() const { return heap_.empty(); }
  void push(const OpenEntry& e) { heap_.push(e); }
  void remove(std::uint32_t) {}
  std::optional<OpenEntry> pop(const std::vector<GridNode>& nodes,
                               const std::vector<std::uint8_t>& in_open) {
    while (!heap_.empty()) {
      const OpenEntry e = heap_.pop();
      if (in_open[e.node] && nodes[e.node].g == e.g) return e;
    }
    return std::nullopt;
  }

 private:
  BinaryHeap<OpenEntry, EntryBefore> heap_;
};

// Linked-list open set: linear scan for the minimum, true deletion through
// per-node iterators.
class ListOpenSet {
 public:
  explicit ListOpenSet(std::size_t nodes) : where_(nodes) {}
  [[nodiscard]] bool empty() const { return list_.empty(); }
  void push(const OpenEntry& e) { where_[e.node] = list_.insert(list_.end(), e); }
  void remove(std::uint32_t node) { list_.erase(where_[node]); }
  std::optional<OpenEntry> pop(const std::vector<GridNode>&, const std::vector<std::uint8_t>&) {
    if (list_.empty()) return std::nullopt;
    EntryBefore before;
    auto best = list_.begin();
    for (auto it = std::next(best); it != list_.end(); ++it) {
      if (before(*it, *best)) best = it;
    }
    const OpenEntry e = *best;
    list_.erase(best);
    return e;
  }

 private:
  std::list<OpenEntry> list_;
  std::vector<std::list<OpenEntry>::iterator> where_;
};

template <typename OpenSet>
SearchResult run_search(const ReachabilityGrid& grid, const CellIndex& start,
                        const CellIndex& end, const SearchOptions& options) {
  if (!grid.contains(start) || !grid.contains(end)) {
    throw Error(ErrorCode::kInvalidEndpoint, "endpoint outside the map window");
  }
  if (!grid.reachable(start) || !grid.reachable(end)) {
    throw Error(ErrorCode::kInvalidEndpoint, "endpoint is an occupied cell");
  }

  SearchResult result;
  SearchTree tree{&grid, std::vector<GridNode>(grid.size())};
  auto& nodes = tree.nodes;
  std::vector<std::uint8_t> in_open(grid.size(), 0);
  std::unordered_set<std::uint32_t> closed;
  closed.reserve(1024);
  OpenSet open(grid.size());
  std::uint64_t seq = 0;

  auto heuristic = [&](const CellIndex& c) { return options.use_heuristic ? manhattan(c, end) : 0; };

  const auto start_id = static_cast<std::uint32_t>(grid.linear(start));
  const auto end_id = static_cast<std::uint32_t>(grid.linear(end));
  nodes[start_id] = {start, 0, heuristic(start), -1};
  open.push({nodes[start_id].f, 0, seq++, start_id});
  in_open[start_id] = 1;
  ++result.pushed;

  // The search stops as soon as End enters the open set. With unit moves
  // and a Manhattan (or zero) heuristic the node that discovers End is
  // adjacent to it and was popped with minimal f, so g(End) is optimal.
  while (!in_open[end_id]) {
    const auto popped = open.pop(nodes, in_open);
    if (!popped) throw Error(ErrorCode::kUnreachableGoal, "can't find path");
    const std::uint32_t i = popped->node;
    in_open[i] = 0;
    closed.insert(i);
    ++result.expanded;
    if (options.record_expansions) result.expansion_order.push_back(nodes[i].cell);

    const CellIndex ci = nodes[i].cell;
    const std::array<CellIndex, 4> neighbours{
        {{ci.h + 1, ci.v}, {ci.h - 1, ci.v}, {ci.h, ci.v + 1}, {ci.h, ci.v - 1}}};
    for (const auto& cj : neighbours) {
      if (!grid.reachable(cj)) continue;
      const auto j = static_cast<std::uint32_t>(grid.linear(cj));
      if (closed.count(j)) continue;
      const int cost = nodes[i].g + 1;
      if (in_open[j] && cost < nodes[j].g) {
        open.remove(j);
        in_open[j] = 0;
      }
      if (!in_open[j]) {
        nodes[j] = {cj, cost, cost + heuristic(cj), static_cast<std::int32_t>(i)};
        open.push({nodes[j].f, cost, seq++, j});
        in_open[j] = 1;
        ++result.pushed;
      }
    }
  }

  result.path = reconstruct_path(tree, end);
  return result;
}

}  // namespace detail

/// Full search with statistics.
[[nodiscard]] inline SearchResult plan(const ReachabilityGrid& grid, const CellIndex& start,
                                       const CellIndex& end, const SearchOptions& options = {}) {
  if (options.open_set == OpenSetKind::kBinaryHeap) {
    return detail::run_search<detail::HeapOpenSet>(grid, start, end, options);
  }
  return detail::run_search<detail::ListOpenSet>(grid, start, end, options);
}

[[nodiscard]] inline PlannedPath astar_search(const CellIndex& start, const CellIndex& end,
                                              const ReachabilityGrid& grid,
                                              OpenSetKind kind = OpenSetKind::kBinaryHeap) {
  return plan(grid, start, end, {kind, true, false}).path;
}

[[nodiscard]] inline PlannedPath astar_search(const CellIndex& start, const CellIndex& end,
                                              const OccupancyGridMap& map,
                                              OpenSetKind kind = OpenSetKind::kBinaryHeap) {
  return astar_search(start, end, map.to_grid(), kind);
}

/// Uninformed search (h = 0). Defaults to the linked-list open set, the
/// traditional baseline the heap variant is measured against.
[[nodiscard]] inline PlannedPath dijkstra_search(const CellIndex& start, const CellIndex& end,
                                                 const ReachabilityGrid& grid,
                                                 OpenSetKind kind = OpenSetKind::kLinkedList) {
  return plan(grid, start, end, {kind, false, false}).path;
}

[[nodiscard]] inline PlannedPath dijkstra_search(const CellIndex& start, const CellIndex& end,
                                                 const OccupancyGridMap& map,
                                                 OpenSetKind kind = OpenSetKind::kLinkedList) {
  return dijkstra_search(start, end, map.to_grid(), kind);
}

}  // namespace warenav
