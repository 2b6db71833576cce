#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "geoset/error.hpp"
#include "geoset/geometry.hpp"
#include "geoset/synthetic.hpp"

using namespace geoset;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  std::vector<Vec3> points(n);
  for (auto& p : points) p = {uniform(rng), uniform(rng), uniform(rng)};
  return points;
}

// All-pairs k-NN ordered by (squared distance, index).
std::vector<std::vector<std::uint32_t>> brute_force_knn(const std::vector<Vec3>& points, int k) {
  std::vector<std::vector<std::uint32_t>> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::size_t j = 0; j < points.size(); ++j)
      if (j != i) all.emplace_back((points[i] - points[j]).squaredNorm(), static_cast<std::uint32_t>(j));
    std::sort(all.begin(), all.end());
    for (int r = 0; r < k; ++r) out[i].push_back(all[r].second);
  }
  return out;
}

PointCloud grid_plane(int n, double spacing) {
  PointCloud cloud;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) cloud.positions.push_back({i * spacing, j * spacing, 0.0});
  return cloud;
}

}  // namespace

TEST(Knn, TwoPointsGiveOneEdge) {
  PointCloud cloud;
  cloud.positions = {{0, 0, 0}, {1, 0, 0}};
  const auto edges = build_knn_graph(cloud, 1);
  ASSERT_EQ(edges.size(), 1u);
  EXPECT_EQ(edges[0], (Edge{0, 1}));
}

TEST(Knn, CollinearEquallySpacedPoints) {
  PointCloud cloud;
  cloud.positions = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  // Point 1 is equidistant from 0 and 2; the smaller index wins.
  EXPECT_EQ(k_nearest(cloud.positions, 1)[1], std::vector<std::uint32_t>{0});
  EXPECT_EQ(build_knn_graph(cloud, 1), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(Knn, FullNeighborhoodIsCompleteGraph) {
  PointCloud cloud;
  cloud.positions = random_points(9, 3);
  EXPECT_EQ(build_knn_graph(cloud, 8).size(), 9u * 8u / 2u);
}

TEST(Knn, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto points = random_points(300, seed);
    for (int k : {1, 4, 10}) EXPECT_EQ(k_nearest(points, k), brute_force_knn(points, k)) << "seed " << seed;
  }
}

TEST(Knn, MatchesBruteForceOnLatticeTies) {
  std::vector<Vec3> points;
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y)
      for (int z = 0; z < 3; ++z) points.push_back({double(x), double(y), double(z)});
  for (int k : {1, 6, 12}) EXPECT_EQ(k_nearest(points, k), brute_force_knn(points, k));
}

TEST(Knn, IndependentOfInsertionOrder) {
  const auto points = random_points(200, 11);
  std::vector<std::uint32_t> perm(points.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));

  PointCloud original, shuffled;
  original.positions = points;
  shuffled.positions.resize(points.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.positions[i] = points[perm[i]];

  // Map shuffled indices back to original ones and compare canonical lists.
  std::vector<Edge> mapped;
  for (const auto& e : build_knn_graph(shuffled, 6)) mapped.push_back({perm[e.a], perm[e.b]});
  EXPECT_EQ(canonicalize_edges(mapped), build_knn_graph(original, 6));
}

TEST(Knn, RejectsBadK) {
  PointCloud cloud;
  cloud.positions = random_points(4, 1);
  EXPECT_THROW(build_knn_graph(cloud, 0), InvalidArgument);
  EXPECT_THROW(build_knn_graph(cloud, 4), InvalidArgument);
}

TEST(CanonicalizeEdges, SortsSwapsAndDeduplicates) {
  EXPECT_EQ(canonicalize_edges({{3, 1}, {1, 3}, {2, 2}, {0, 5}}), (std::vector<Edge>{{0, 5}, {1, 3}}));
}

TEST(Normals, PlanarCloudGivesPlusZ) {
  const auto result = estimate_normals(grid_plane(8, 0.1), 5, Vec3(0.3, 0.3, 1.0));
  EXPECT_TRUE(result.degenerate.empty());
  for (const auto& n : result.cloud.normals) {
    EXPECT_NEAR(n.z(), 1.0, 1e-9);
    EXPECT_NEAR(n.head<2>().norm(), 0.0, 1e-9);
  }
}

TEST(Normals, CoincidentPointsAreFlagged) {
  PointCloud cloud;
  cloud.positions = {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  const auto result = estimate_normals(cloud, 3);
  EXPECT_EQ(result.degenerate.size(), 4u);
  for (const auto& n : result.cloud.normals) EXPECT_EQ(n, Vec3::UnitZ());
}

TEST(Normals, CollinearNeighborhoodIsFlagged) {
  PointCloud cloud;
  for (int i = 0; i < 6; ++i) cloud.positions.push_back({0.1 * i, 0.0, 0.0});
  EXPECT_EQ(estimate_normals(cloud, 3).degenerate.size(), 6u);
}

TEST(Normals, SphereNormalsPointInwardAndMatchAnalytic) {
  // Fibonacci sphere: near-uniform spacing, so every neighborhood is a small cap.
  PointCloud cloud;
  const int count = 2000;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(1.0 - z * z);
    cloud.positions.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
  }
  const auto result = estimate_normals(cloud, 8);
  EXPECT_TRUE(result.degenerate.empty());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& n = result.cloud.normals[i];
    const Vec3& p = cloud.positions[i];
    EXPECT_GE(n.dot(-p), 0.0);
    EXPECT_GT(n.dot(-p), 0.99) << "point " << i;
  }
}

TEST(Normals, RotationInvariant) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.01);
  PointCloud cloud;
  for (int j = 0; j < 12; ++j)
    for (int i = 0; i < 12; ++i) {
      const double x = 0.1 * i, y = 0.1 * j;
      cloud.positions.push_back({x, y, 0.3 * x * x - 0.2 * y * y + noise(rng) + 2.0});
    }
  const Eigen::Matrix3d rotation =
      (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()) * Eigen::AngleAxisd(-1.1, Vec3::UnitX())).toRotationMatrix();
  PointCloud rotated = cloud;
  for (auto& p : rotated.positions) p = rotation * p;

  const auto base = estimate_normals(cloud, 6);
  const auto turned = estimate_normals(rotated, 6);
  double worst = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 expected = rotation * base.cloud.normals[i];
    const double c = std::min(1.0, std::abs(expected.dot(turned.cloud.normals[i])));
    worst = std::max(worst, std::acos(c));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Normals, RejectsSmallK) {
  EXPECT_THROW(estimate_normals(grid_plane(3, 1.0), 2), InvalidArgument);
  EXPECT_THROW(estimate_normals(grid_plane(2, 1.0), 4), InvalidArgument);
}

TEST(PointCloudValidate, DetectsViolations) {
  PointCloud cloud;
  cloud.positions = {{0, 0, 0}, {1, 0, 0}};
  cloud.normals = {Vec3::UnitZ(), Vec3::UnitZ()};
  cloud.edges = {{0, 1}};
  EXPECT_NO_THROW(validate(cloud));

  auto bad = cloud;
  bad.normals[1] = Vec3(0, 0, 2);
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = cloud;
  bad.edges = {{0, 2}};
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = cloud;
  bad.edges = {{1, 1}};
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = cloud;
  bad.edges = {{0, 1}, {0, 1}};
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = cloud;
  bad.edges = {{1, 0}};
  EXPECT_THROW(validate(bad), InvalidArgument);
}

TEST(SyntheticScene, SinglePlaneHasOneLabel) {
  SyntheticSceneSpec spec;
  spec.primitives.push_back(PlanePrimitive{Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 1, 0), 400.0});
  const auto scene = generate_scene(spec);
  EXPECT_EQ(scene.cloud.size(), 400u);
  EXPECT_EQ(std::set<std::uint32_t>(scene.labels.begin(), scene.labels.end()), std::set<std::uint32_t>{0});
}

TEST(SyntheticScene, TwoParallelPlanesHaveTwoLabels) {
  SyntheticSceneSpec spec;
  spec.primitives.push_back(PlanePrimitive{Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 1, 0), 100.0});
  spec.primitives.push_back(PlanePrimitive{Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0), 100.0});
  const auto scene = generate_scene(spec);
  EXPECT_EQ(std::set<std::uint32_t>(scene.labels.begin(), scene.labels.end()), (std::set<std::uint32_t>{0, 1}));
  for (std::size_t i = 0; i < scene.cloud.size(); ++i) EXPECT_EQ(scene.cloud.positions[i].z(), scene.labels[i]);
}

TEST(SyntheticScene, DeterministicAndPartitioning) {
  SyntheticSceneSpec spec;
  spec.primitives.push_back(BoxPrimitive{Vec3(0, 0, 0.5), Vec3(1, 0.5, 1), 0.3, 300.0});
  spec.primitives.push_back(PlanePrimitive{Vec3(-2, -2, 0), Vec3(4, 0, 0), Vec3(0, 4, 0), 50.0});
  spec.noise_sigma = 0.01;
  spec.seed = 99;
  const auto a = generate_scene(spec);
  const auto b = generate_scene(spec);
  EXPECT_EQ(a.cloud, b.cloud);
  EXPECT_EQ(a.labels, b.labels);
  ASSERT_EQ(a.labels.size(), a.cloud.size());
  for (auto label : a.labels) EXPECT_LT(label, 7u);
  EXPECT_NO_THROW(validate(a.cloud));

  spec.seed = 100;
  EXPECT_NE(generate_scene(spec).cloud, a.cloud);
}

TEST(SyntheticScene, BoxFacesPointOutward) {
  SyntheticSceneSpec spec;
  spec.primitives.push_back(BoxPrimitive{Vec3(1, 2, 3), Vec3(1, 2, 0.5), 0.4, 100.0});
  const auto scene = generate_scene(spec);
  for (std::size_t i = 0; i < scene.cloud.size(); ++i)
    EXPECT_GT(scene.cloud.normals[i].dot(scene.cloud.positions[i] - Vec3(1, 2, 3)), 0.0);
}

TEST(SyntheticScene, RejectsInvalidSpecs) {
  EXPECT_THROW(generate_scene({}), InvalidArgument);
  SyntheticSceneSpec spec;
  spec.primitives.push_back(PlanePrimitive{Vec3::Zero(), Vec3(1, 0, 0), Vec3(0, 1, 0), 0.0});
  EXPECT_THROW(generate_scene(spec), InvalidArgument);
  spec.primitives[0] = BoxPrimitive{Vec3::Zero(), Vec3(1, 0, 1), 0.0, 10.0};
  EXPECT_THROW(generate_scene(spec), InvalidArgument);
}
