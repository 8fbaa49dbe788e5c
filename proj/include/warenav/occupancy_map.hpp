// Occupancy grid mapping: keyframe depth points -> world cloud -> motion
// plane -> signed-index grid of point counts.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "warenav/errors.hpp"
#include "warenav/geometry.hpp"
#include "warenav/visual_frontend.hpp"

namespace warenav {

struct CellIndex {
  int h = 0;
  int v = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct CellIndexHash {
  std::size_t operator()(const CellIndex& c) const noexcept {
    const auto packed = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.h)) << 32) |
                        static_cast<std::uint32_t>(c.v);
    return std::hash<std::uint64_t>{}(packed);
  }
};

using CellCountTable = std::unordered_map<CellIndex, int, CellIndexHash>;

struct WorldPointCloud {
  std::vector<Vec3> points;
};

/// Points on the motion plane, (x, z).
using PlanarPoints = std::vector<Vec2>;

struct IndexRange {
  int min = 0;
  int max = 0;
  [[nodiscard]] bool contains(int i) const { return i >= min && i <= max; }
  [[nodiscard]] int extent() const { return max - min; }
  [[nodiscard]] int cells() const { return max - min + 1; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Rasterization {
  CellCountTable counts;
  IndexRange h_range;
  IndexRange v_range;
  double x_min = 0.0, x_max = 0.0, z_min = 0.0, z_max = 0.0;
  /// (X_max - X_min) / H and (Z_max - Z_min) / V.
  double h_span = 0.0;
  double v_span = 0.0;
  std::size_t point_count = 0;
};

/// Every selected pixel of every keyframe, expressed in the first
/// keyframe's camera frame through the chain of inverted links.
[[nodiscard]] inline WorldPointCloud collect_world_points(const std::vector<KeyFrame>& chain,
                                                          const CameraIntrinsics& cam) {
  if (chain.empty()) throw Error(ErrorCode::kInvalidArgument, "keyframe chain is empty");
  WorldPointCloud cloud;
  SE3Transform to_world = SE3Transform::identity();
  for (std::size_t j = 0; j < chain.size(); ++j) {
    const auto& kf = chain[j];
    for (const auto& sp : kf.pixels) {
      const Vec3 local = backproject(Vec2(sp.pixel.u, sp.pixel.v), sp.depth.mean, cam);
      cloud.points.push_back(to_world * local);
    }
    if (j + 1 < chain.size()) {
      if (!kf.to_next) {
        throw Error(ErrorCode::kInvalidArgument, "non-final keyframe without a successor link");
      }
      to_world = to_world * invert(*kf.to_next);
    }
  }
  return cloud;
}

[[nodiscard]] inline PlanarPoints project_to_plane(const WorldPointCloud& cloud) {
  PlanarPoints out;
  out.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.emplace_back(p.x(), p.z());
  return out;
}

[[nodiscard]] inline CellIndex cell_of(const Vec2& xz, double cell_h, double cell_v) {
  return {static_cast<int>(std::floor(xz.x() / cell_h)),
          static_cast<int>(std::floor(xz.y() / cell_v))};
}

/// Origin-anchored floor binning; negative coordinates give negative indices.
[[nodiscard]] inline Rasterization rasterize(const PlanarPoints& planar, double cell_h,
                                             double cell_v) {
  if (!(cell_h > 0.0) || !(cell_v > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "cell sizes must be positive");
  }
  Rasterization out;
  out.point_count = planar.size();
  if (planar.empty()) return out;
  out.x_min = out.z_min = std::numeric_limits<double>::infinity();
  out.x_max = out.z_max = -std::numeric_limits<double>::infinity();
  out.h_range = {std::numeric_limits<int>::max(), std::numeric_limits<int>::min()};
  out.v_range = out.h_range;
  for (const auto& p : planar) {
    const CellIndex c = cell_of(p, cell_h, cell_v);
    ++out.counts[c];
    out.x_min = std::min(out.x_min, p.x());
    out.x_max = std::max(out.x_max, p.x());
    out.z_min = std::min(out.z_min, p.y());
    out.z_max = std::max(out.z_max, p.y());
    out.h_range.min = std::min(out.h_range.min, c.h);
    out.h_range.max = std::max(out.h_range.max, c.h);
    out.v_range.min = std::min(out.v_range.min, c.v);
    out.v_range.max = std::max(out.v_range.max, c.v);
  }
  out.h_span = (out.x_max - out.x_min) / cell_h;
  out.v_span = (out.z_max - out.z_min) / cell_v;
  return out;
}

/// Dense window of reachability over an index rectangle; what the planner
/// searches.
class ReachabilityGrid {
 public:
  ReachabilityGrid() = default;
  ReachabilityGrid(IndexRange h_range, IndexRange v_range, bool reachable = true)
      : h_range_(h_range), v_range_(v_range) {
    if (h_range.max < h_range.min || v_range.max < v_range.min) {
      throw Error(ErrorCode::kInvalidArgument, "empty grid window");
    }
    free_.assign(static_cast<std::size_t>(h_range.cells()) * v_range.cells(), reachable ? 1 : 0);
  }

  /// Window with origin (0, 0) and the given size.
  static ReachabilityGrid sized(int width, int height) {
    return ReachabilityGrid({0, width - 1}, {0, height - 1});
  }

  [[nodiscard]] int width() const { return h_range_.cells(); }
  [[nodiscard]] int height() const { return v_range_.cells(); }
  [[nodiscard]] std::size_t size() const { return free_.size(); }
  [[nodiscard]] const IndexRange& h_range() const { return h_range_; }
  [[nodiscard]] const IndexRange& v_range() const { return v_range_; }

  [[nodiscard]] bool contains(const CellIndex& c) const {
    return h_range_.contains(c.h) && v_range_.contains(c.v);
  }
  [[nodiscard]] bool reachable(const CellIndex& c) const {
    return contains(c) && free_[linear(c)] != 0;
  }
  void set_reachable(const CellIndex& c, bool reachable) { free_.at(linear(c)) = reachable ? 1 : 0; }

  [[nodiscard]] std::size_t linear(const CellIndex& c) const {
    return static_cast<std::size_t>(c.v - v_range_.min) * width() + (c.h - h_range_.min);
  }
  [[nodiscard]] CellIndex cell(std::size_t linear_index) const {
    const int w = width();
    return {h_range_.min + static_cast<int>(linear_index % w),
            v_range_.min + static_cast<int>(linear_index / w)};
  }
  [[nodiscard]] bool reachable_linear(std::size_t i) const { return free_[i] != 0; }

 private:
  IndexRange h_range_;
  IndexRange v_range_;
  std::vector<std::uint8_t> free_;
};

/// Sparse grid of per-cell point counts. A cell is unreachable iff its
/// count exceeds the threshold.
class OccupancyGridMap {
 public:
  OccupancyGridMap() = default;
  OccupancyGridMap(double cell_h, double cell_v, int threshold, IndexRange h_range,
                   IndexRange v_range)
      : cell_h_(cell_h), cell_v_(cell_v), threshold_(threshold), h_range_(h_range),
        v_range_(v_range) {
    if (!(cell_h > 0.0) || !(cell_v > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "cell sizes must be positive");
    }
    if (threshold < 0) throw Error(ErrorCode::kInvalidArgument, "threshold must be >= 0");
  }

  [[nodiscard]] double cell_h() const { return cell_h_; }
  [[nodiscard]] double cell_v() const { return cell_v_; }
  [[nodiscard]] int threshold() const { return threshold_; }
  [[nodiscard]] const IndexRange& h_range() const { return h_range_; }
  [[nodiscard]] const IndexRange& v_range() const { return v_range_; }
  [[nodiscard]] const CellCountTable& counts() const { return counts_; }

  [[nodiscard]] int count(const CellIndex& c) const {
    const auto it = counts_.find(c);
    return it == counts_.end() ? 0 : it->second;
  }
  [[nodiscard]] bool contains(const CellIndex& c) const {
    return h_range_.contains(c.h) && v_range_.contains(c.v);
  }
  [[nodiscard]] bool reachable(const CellIndex& c) const { return count(c) <= threshold_; }

  /// Sets a cell count, growing the index window to include the cell.
  void set_count(const CellIndex& c, int n) {
    if (n < 0) throw Error(ErrorCode::kInvalidArgument, "negative cell count");
    if (n == 0) {
      counts_.erase(c);
    } else {
      counts_[c] = n;
    }
    h_range_ = {std::min(h_range_.min, c.h), std::max(h_range_.max, c.h)};
    v_range_ = {std::min(v_range_.min, c.v), std::max(v_range_.max, c.v)};
  }

  /// Marks a cell as an obstacle (count threshold + 1).
  void block(const CellIndex& c) { set_count(c, threshold_ + 1); }

  /// Dense reachability window over the map's index ranges, with obstacles
  /// optionally grown by a disc of `inflation_cells`.
  [[nodiscard]] ReachabilityGrid to_grid(double inflation_cells = 0.0) const {
    ReachabilityGrid grid(h_range_, v_range_);
    const int reach = static_cast<int>(std::floor(inflation_cells));
    for (const auto& [cell, n] : counts_) {
      if (n <= threshold_) continue;
      for (int dv = -reach; dv <= reach; ++dv) {
        for (int dh = -reach; dh <= reach; ++dh) {
          if (dh * dh + dv * dv > inflation_cells * inflation_cells) continue;
          const CellIndex c{cell.h + dh, cell.v + dv};
          if (grid.contains(c)) grid.set_reachable(c, false);
        }
      }
    }
    return grid;
  }

  friend bool operator==(const OccupancyGridMap&, const OccupancyGridMap&) = default;

 private:
  double cell_h_ = 0.02;
  double cell_v_ = 0.02;
  int threshold_ = 200;
  IndexRange h_range_;
  IndexRange v_range_;
  CellCountTable counts_;
};

[[nodiscard]] inline OccupancyGridMap threshold_occupancy(const Rasterization& raster,
                                                          double cell_h, double cell_v,
                                                          int threshold) {
  OccupancyGridMap map(cell_h, cell_v, threshold, raster.h_range, raster.v_range);
  for (const auto& [cell, n] : raster.counts) map.set_count(cell, n);
  return map;
}

/// Full pipeline from a keyframe chain.
[[nodiscard]] inline OccupancyGridMap build_map(const std::vector<KeyFrame>& chain,
                                                const CameraIntrinsics& cam, double cell_h,
                                                double cell_v, int threshold) {
  const auto raster = rasterize(project_to_plane(collect_world_points(chain, cam)), cell_h, cell_v);
  return threshold_occupancy(raster, cell_h, cell_v, threshold);
}

struct MapStats {
  int extent_h = 0;
  int extent_v = 0;
  double length_m = 0.0;
  double width_m = 0.0;
  double ratio = 0.0;
};

/// Metric size of the mapped area. The horizontal grid extent is converted
/// with k_sv and the vertical one with k_sh, the pairing under which a
/// 0.02 x 0.02 cell measures 0.076 x 0.0685 m with k_sh = 0.2921 and
/// k_sv = 0.2628.
[[nodiscard]] inline MapStats map_stats(const OccupancyGridMap& map, double k_sh, double k_sv) {
  if (!(k_sh > 0.0) || !(k_sv > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scale factors must be positive");
  }
  MapStats s;
  s.extent_h = map.h_range().extent();
  s.extent_v = map.v_range().extent();
  if (s.extent_h <= 0 || s.extent_v <= 0) {
    throw Error(ErrorCode::kDegenerateMap, "map has zero extent");
  }
  s.length_m = s.extent_h * map.cell_h() / k_sv;
  s.width_m = s.extent_v * map.cell_v() / k_sh;
  s.ratio = s.length_m / s.width_m;
  return s;
}

// ---------------------------------------------------------------------------
// Text formats

namespace detail {

inline std::string shortest(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token) {
  double value = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw Error(ErrorCode::kParse, "bad number '" + token + "'");
  }
  return value;
}

inline int parse_int(const std::string& token) {
  int value = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw Error(ErrorCode::kParse, "bad integer '" + token + "'");
  }
  return value;
}

}  // namespace detail

/// `ogm v1 H V T1 hmin hmax vmin vmax`, then `h v count` per non-empty cell,
/// sorted by (v, h).
inline void write_map(std::ostream& out, const OccupancyGridMap& map) {
  out << "ogm v1 " << detail::shortest(map.cell_h()) << ' ' << detail::shortest(map.cell_v())
      << ' ' << map.threshold() << ' ' << map.h_range().min << ' ' << map.h_range().max << ' '
      << map.v_range().min << ' ' << map.v_range().max << '\n';
  std::vector<std::pair<CellIndex, int>> cells(map.counts().begin(), map.counts().end());
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.v, a.first.h) < std::tie(b.first.v, b.first.h);
  });
  for (const auto& [c, n] : cells) out << c.h << ' ' << c.v << ' ' << n << '\n';
}

[[nodiscard]] inline OccupancyGridMap read_map(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "empty map file");
  std::istringstream header(line);
  std::string magic, version, h, v, t1, hmin, hmax, vmin, vmax;
  header >> magic >> version >> h >> v >> t1 >> hmin >> hmax >> vmin >> vmax;
  if (magic != "ogm" || version != "v1" || vmax.empty()) {
    throw Error(ErrorCode::kParse, "bad map header");
  }
  OccupancyGridMap map(detail::parse_double(h), detail::parse_double(v), detail::parse_int(t1),
                       {detail::parse_int(hmin), detail::parse_int(hmax)},
                       {detail::parse_int(vmin), detail::parse_int(vmax)});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string ch, cv, cn;
    if (!(row >> ch >> cv >> cn)) throw Error(ErrorCode::kParse, "bad map row '" + line + "'");
    map.set_count({detail::parse_int(ch), detail::parse_int(cv)}, detail::parse_int(cn));
  }
  return map;
}

[[nodiscard]] inline WorldPointCloud read_point_cloud(std::istream& in) {
  WorldPointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x)) continue;  // blank line
    if (!(row >> y >> z)) throw Error(ErrorCode::kParse, "bad point '" + line + "'");
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

}  // namespace warenav
