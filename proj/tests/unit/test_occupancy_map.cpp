#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "warenav/occupancy_map.hpp"

namespace {

using namespace warenav;

// Wall points of an axis-aligned room at several heights, `per_cell` points
// in each wall cell, placed at cell centres so binning is unambiguous.
WorldPointCloud room_cloud(int h0, int h1, int v0, int v1, int per_cell, double cell) {
  WorldPointCloud cloud;
  auto add = [&](int h, int v) {
    for (int k = 0; k < per_cell; ++k) {
      cloud.points.emplace_back((h + 0.5) * cell, -0.5 + 0.1 * k, (v + 0.5) * cell);
    }
  };
  for (int h = h0; h <= h1; ++h) {
    add(h, v0);
    add(h, v1);
  }
  for (int v = v0 + 1; v < v1; ++v) {
    add(h0, v);
    add(h1, v);
  }
  return cloud;
}

TEST(CellOf, FloorsTowardsNegativeInfinity) {
  EXPECT_EQ(cell_of({0.0, 0.0}, 0.02, 0.02), (CellIndex{0, 0}));
  EXPECT_EQ(cell_of({-0.001, 0.019}, 0.02, 0.02), (CellIndex{-1, 0}));
  EXPECT_EQ(cell_of({-0.02, -0.0400001}, 0.02, 0.02), (CellIndex{-1, -3}));
}

TEST(Rasterize, RoomWallsLandOnAnalyticCells) {
  const double cell = 0.02;
  const auto cloud = room_cloud(-50, 64, -35, 104, 3, cell);
  const auto raster = rasterize(project_to_plane(cloud), cell, cell);
  EXPECT_EQ(raster.h_range, (IndexRange{-50, 64}));
  EXPECT_EQ(raster.v_range, (IndexRange{-35, 104}));
  EXPECT_EQ(raster.point_count, cloud.points.size());
  const auto map = threshold_occupancy(raster, cell, cell, 2);
  EXPECT_EQ(map.count({-50, -35}), 3);
  EXPECT_FALSE(map.reachable({-50, 0}));
  EXPECT_FALSE(map.reachable({64, 104}));
  EXPECT_TRUE(map.reachable({0, 0}));
  EXPECT_TRUE(map.reachable({-49, -34}));
  EXPECT_NEAR(raster.h_span, 114.0, 1e-9);
  EXPECT_NEAR(raster.v_span, 139.0, 1e-9);
}

TEST(Rasterize, ThresholdIsInclusiveForFree) {
  const auto raster = rasterize({{0.01, 0.01}, {0.011, 0.012}}, 0.02, 0.02);
  EXPECT_TRUE(threshold_occupancy(raster, 0.02, 0.02, 2).reachable({0, 0}));
  EXPECT_FALSE(threshold_occupancy(raster, 0.02, 0.02, 1).reachable({0, 0}));
}

TEST(Rasterize, RejectsBadCellSize) {
  EXPECT_THROW((void)rasterize({}, 0.0, 0.02), Error);
  EXPECT_THROW((void)rasterize({}, 0.02, -1.0), Error);
}

TEST(Rasterize, EmptyCloudGivesNoCounts) {
  const auto raster = rasterize({}, 0.02, 0.02);
  EXPECT_TRUE(raster.counts.empty());
}

TEST(WorldPoints, ChainMapsLaterKeyframesThroughInvertedLinks) {
  const CameraIntrinsics cam{100, 100, 50, 50};
  KeyFrame a, b;
  a.pixels.push_back({{50, 50}, {0.5, 0.1}});  // (0, 0, 2) in a
  b.pixels.push_back({{50, 50}, {1.0, 0.1}});  // (0, 0, 1) in b
  a.to_next = SE3Transform::from_translation(Vec3(0.0, 0.0, -1.0));  // b sits 1 ahead of a
  const auto cloud = collect_world_points({a, b}, cam);
  ASSERT_EQ(cloud.points.size(), 2u);
  EXPECT_NEAR((cloud.points[0] - Vec3(0, 0, 2)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((cloud.points[1] - Vec3(0, 0, 2)).norm(), 0.0, 1e-15);
}

TEST(WorldPoints, MissingLinkIsAnError) {
  KeyFrame a, b;
  EXPECT_THROW((void)collect_world_points({a, b}, CameraIntrinsics{}), Error);
  EXPECT_THROW((void)collect_world_points({}, CameraIntrinsics{}), Error);
}

TEST(MapStats, SurveyedRoomExtents) {
  OccupancyGridMap map(0.02, 0.02, 200, {-59, 70}, {-31, 91});
  const auto s = map_stats(map, 0.2921, 0.2628);
  EXPECT_NEAR(s.length_m / 9.804, 1.0, 0.005);
  EXPECT_NEAR(s.width_m / 8.35, 1.0, 0.005);
  EXPECT_NEAR(s.ratio / 1.174, 1.0, 0.005);
}

TEST(MapStats, SingleCellStepIsOneCellOfEachScale) {
  OccupancyGridMap map(0.02, 0.02, 200, {0, 1}, {0, 1});
  const auto s = map_stats(map, 0.2921, 0.2628);
  EXPECT_DOUBLE_EQ(s.length_m, 0.02 / 0.2628);
  EXPECT_DOUBLE_EQ(s.width_m, 0.02 / 0.2921);
}

TEST(MapStats, DegenerateAndInvalid) {
  OccupancyGridMap flat(0.02, 0.02, 200, {0, 5}, {3, 3});
  try {
    (void)map_stats(flat, 0.3, 0.3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateMap);
  }
  EXPECT_THROW((void)map_stats(OccupancyGridMap(0.02, 0.02, 1, {0, 2}, {0, 2}), 0.0, 1.0), Error);
}

TEST(MapFile, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> idx(-40, 40);
  std::uniform_int_distribution<int> cnt(1, 500);
  OccupancyGridMap map(0.1 / 3.0, 0.0200000000000001, 137, {-40, 40}, {-40, 40});
  for (int i = 0; i < 300; ++i) map.set_count({idx(rng), idx(rng)}, cnt(rng));
  std::stringstream first;
  write_map(first, map);
  const auto back = read_map(first);
  EXPECT_EQ(back, map);
  EXPECT_EQ(back.cell_h(), map.cell_h());
  std::stringstream second;
  write_map(second, back);
  EXPECT_EQ(first.str(), second.str());
}

TEST(MapFile, HeaderFormat) {
  OccupancyGridMap map(0.02, 0.02, 200, {-1, 2}, {0, 3});
  map.set_count({2, 1}, 5);
  map.set_count({-1, 0}, 300);
  std::stringstream ss;
  write_map(ss, map);
  EXPECT_EQ(ss.str(), "ogm v1 0.02 0.02 200 -1 2 0 3\n-1 0 300\n2 1 5\n");
}

TEST(MapFile, RejectsGarbage) {
  std::stringstream bad_header("map v2\n");
  EXPECT_THROW((void)read_map(bad_header), Error);
  std::stringstream bad_row("ogm v1 0.02 0.02 200 0 1 0 1\n0 x 3\n");
  EXPECT_THROW((void)read_map(bad_row), Error);
  std::stringstream empty;
  EXPECT_THROW((void)read_map(empty), Error);
}

TEST(PointCloud, ParsesWhitespaceSeparatedRows) {
  std::stringstream ss("1 2 3\n\n-0.5\t0 1e-3\n");
  const auto cloud = read_point_cloud(ss);
  ASSERT_EQ(cloud.points.size(), 2u);
  EXPECT_EQ(cloud.points[1], Vec3(-0.5, 0, 1e-3));
  std::stringstream bad("1 2\n");
  EXPECT_THROW((void)read_point_cloud(bad), Error);
}

TEST(Grid, InflationGrowsObstacles) {
  OccupancyGridMap map(0.02, 0.02, 0, {0, 6}, {0, 6});
  map.block({3, 3});
  const auto plain = map.to_grid();
  const auto grown = map.to_grid(1.0);
  EXPECT_TRUE(plain.reachable({2, 3}));
  EXPECT_FALSE(grown.reachable({2, 3}));
  EXPECT_TRUE(grown.reachable({2, 2}));
  EXPECT_FALSE(grown.reachable({7, 3}));  // outside the window
}

TEST(Grid, SetCountGrowsWindow) {
  OccupancyGridMap map(0.02, 0.02, 1, {0, 0}, {0, 0});
  map.set_count({-3, 4}, 7);
  EXPECT_EQ(map.h_range(), (IndexRange{-3, 0}));
  EXPECT_EQ(map.v_range(), (IndexRange{0, 4}));
  map.set_count({-3, 4}, 0);
  EXPECT_EQ(map.count({-3, 4}), 0);
  EXPECT_THROW(map.set_count({0, 0}, -1), Error);
}

}  // namespace
