#include <gtest/gtest.h>

#include <set>

#include "geoset/camera.hpp"
#include "geoset/error.hpp"
#include "geoset/projection.hpp"
#include "geoset/segmentation.hpp"
#include "geoset/synthetic.hpp"
#include "scenes.hpp"

using namespace geoset;
using namespace geoset::testing;

namespace {

CameraView vga_view() { return make_view(0, 640, 480, 500.0, Eigen::Matrix4d::Identity()); }

CameraView with_depth(CameraView view, const SyntheticSceneSpec& spec) {
  view.depth = render_depth(spec, view);
  return view;
}

// Frontal plane z = `depth` wide enough to fill every test frustum.
SyntheticSceneSpec wall(double depth) {
  SyntheticSceneSpec spec;
  spec.primitives.push_back(PlanePrimitive{Vec3(-20, -20, depth), Vec3(40, 0, 0), Vec3(0, 40, 0), 1.0});
  return spec;
}

GeoSetPartition single_set(std::size_t n) { return {std::vector<std::uint32_t>(n, 0), n ? 1u : 0u}; }

ViewProjection square_projection(int view_id, int side) {
  ViewProjection p{view_id, side, side, {}};
  for (int v = 0; v < side; ++v)
    for (int u = 0; u < side; ++u)
      p.sets[0].push_back({{u, v}, static_cast<std::uint32_t>(v * side + u)});
  return p;
}

}  // namespace

TEST(ProjectPoint, OpticalAxis) {
  const auto hit = project_point(Vec3(0, 0, 2), vga_view());
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->u, 320);
  EXPECT_EQ(hit->v, 240);
  EXPECT_DOUBLE_EQ(hit->z, 2.0);
}

TEST(ProjectPoint, HandEvaluatedOffAxis) {
  auto view = vga_view();
  view.cx = 320.0;
  view.cy = 240.0;
  const auto hit = project_point(Vec3(1, 0, 2), view);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->u, 570);
  EXPECT_EQ(hit->v, 240);
}

TEST(ProjectPoint, BehindCameraAndOutOfBounds) {
  EXPECT_FALSE(project_point(Vec3(0, 0, -1), vga_view()));
  EXPECT_FALSE(project_point(Vec3(0, 0, 0), vga_view()));
  EXPECT_FALSE(project_point(Vec3(10, 0, 1), vga_view()));
}

TEST(ProjectPoint, RoundsToNearestPixel) {
  auto view = make_view(0, 10, 10, 10.0, Eigen::Matrix4d::Identity());
  view.cx = view.cy = 0.0;
  EXPECT_EQ(project_point(Vec3(0.149, 0.151, 1), view)->u, 1);
  EXPECT_EQ(project_point(Vec3(0.149, 0.151, 1), view)->v, 2);
  EXPECT_FALSE(project_point(Vec3(-0.051, 0, 1), view));
  EXPECT_EQ(project_point(Vec3(-0.049, 0, 1), view)->u, 0);
}

TEST(ProjectPoint, FollowsPose) {
  const auto view = make_view(0, 64, 48, 40.0, look_at(Vec3(1, 2, 3), Vec3(1, 2, 0), Vec3::UnitY()));
  const auto hit = project_point(Vec3(1, 2, 0), view);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->z, 3.0, 1e-12);
  EXPECT_EQ(hit->u, 32);  // round(31.5) with cx = 31.5
  EXPECT_EQ(hit->v, 24);
}

TEST(DepthValidate, Examples) {
  auto view = make_view(0, 2, 1, 1.0, Eigen::Matrix4d::Identity());
  view.depth = {2.0f, 0.0f};
  EXPECT_TRUE(depth_validate(0, 0, 2.0, view));
  EXPECT_TRUE(depth_validate(0, 0, 2.04, view));
  EXPECT_FALSE(depth_validate(0, 0, 2.06, view));
  EXPECT_FALSE(depth_validate(0, 0, 1.94, view));
  EXPECT_FALSE(depth_validate(1, 0, 0.0, view));
  EXPECT_FALSE(depth_validate(1, 0, 0.01, view));
  EXPECT_TRUE(depth_validate(0, 0, 2.06, view, 0.1));
}

TEST(ProjectGeoSets, FrontalPlaneCoversEveryPixelOnce) {
  SyntheticSceneSpec spec;
  spec.primitives.push_back(PlanePrimitive{Vec3(-1, -1, 1), Vec3(2, 0, 0), Vec3(0, 2, 0), 40000.0});
  const auto scene = generate_scene(spec);
  const auto view = with_depth(make_view(3, 16, 12, 12.0, Eigen::Matrix4d::Identity()), spec);
  const auto proj = project_geo_sets(scene.cloud, single_set(scene.cloud.size()), view);
  EXPECT_EQ(proj.view_id, 3);
  ASSERT_EQ(proj.sets.size(), 1u);
  std::set<Pixel> seen;
  for (const auto& p : proj.sets.at(0)) EXPECT_TRUE(seen.insert(p.pixel).second);
  EXPECT_EQ(seen.size(), 16u * 12u);
  EXPECT_TRUE(std::is_sorted(proj.sets.at(0).begin(), proj.sets.at(0).end(),
                             [](const auto& a, const auto& b) { return std::tie(a.pixel.v, a.pixel.u) < std::tie(b.pixel.v, b.pixel.u); }));
}

TEST(ProjectGeoSets, NearerPointWinsAndSmallerIndexBreaksTies) {
  auto view = make_view(0, 3, 3, 1.0, Eigen::Matrix4d::Identity());
  view.depth.assign(9, 1.0f);
  PointCloud cloud;
  cloud.positions = {{0, 0, 1.02}, {0, 0, 1.0}, {0, 0, 1.0}};
  const GeoSetPartition partition{{0, 1, 2}, 3};
  const auto proj = project_geo_sets(cloud, partition, view);
  ASSERT_EQ(proj.sets.size(), 1u);
  EXPECT_EQ(proj.sets.at(1).front().point, 1u);
}

TEST(ProjectGeoSets, OccludedSetLosesOverlapRegion) {
  const auto spec = occluder_scene(20000.0, 0.0, 1);
  const auto scene = generate_scene(spec);
  const auto faces = scene_faces(spec);
  const auto view = with_depth(make_view(0, 48, 40, 40.0, looking_down(Vec3(0.05, 0.02, 2.0))), spec);
  const GeoSetPartition partition{scene.labels, 2};
  const auto proj = project_geo_sets(scene.cloud, partition, view);

  std::size_t board_pixels = 0;
  for (const auto& p : proj.sets.at(0)) {
    const double front = pixel_zbuffer(faces, view, p.pixel.u, p.pixel.v);
    EXPECT_GT(front, 2.0 - 0.05) << "floor pixel (" << p.pixel.u << ", " << p.pixel.v << ") is behind the board";
  }
  for (int v = 0; v < view.height; ++v)
    for (int u = 0; u < view.width; ++u) board_pixels += std::abs(pixel_zbuffer(faces, view, u, v) - 1.5) < 1e-9;
  ASSERT_GT(board_pixels, 100u);
  EXPECT_EQ(proj.sets.at(1).size(), board_pixels);
}

TEST(ProjectGeoSets, EmptyFrustumGivesEmptyMap) {
  SyntheticSceneSpec spec = wall(3.0);
  auto view = with_depth(make_view(0, 8, 8, 8.0, Eigen::Matrix4d::Identity()), spec);
  PointCloud cloud;
  cloud.positions = {{0, 0, -3}, {50, 0, 3}};
  EXPECT_TRUE(project_geo_sets(cloud, GeoSetPartition{{0, 1}, 2}, view).sets.empty());
}

TEST(ProjectGeoSets, RejectsMismatchedInputs) {
  auto view = make_view(0, 4, 4, 4.0, Eigen::Matrix4d::Identity());
  PointCloud cloud;
  cloud.positions = {{0, 0, 1}};
  EXPECT_THROW(project_geo_sets(cloud, single_set(1), view), InvalidArgument);
  view.depth.assign(16, 1.0f);
  EXPECT_THROW(project_geo_sets(cloud, single_set(2), view), InvalidArgument);
}

TEST(Overlap, IdenticalViewsGiveOne) {
  const auto view = with_depth(make_view(0, 32, 24, 20.0, look_at(Vec3(0.3, -2, 1.5), Vec3(0, 0, 0))), occluder_scene(1, 0, 0));
  EXPECT_DOUBLE_EQ(compute_overlap(view, view), 1.0);
}

TEST(Overlap, DisjointFrustaGiveZero) {
  const auto spec = wall(2.0);
  const auto a = with_depth(make_view(0, 32, 24, 20.0, looking_forward(Vec3(0, 0, 0))), spec);
  const auto b = with_depth(make_view(1, 32, 24, 20.0, looking_forward(Vec3(10, 0, 0))), spec);
  EXPECT_DOUBLE_EQ(compute_overlap(a, b), 0.0);
}

TEST(Overlap, HalfShiftedCameraGivesHalf) {
  // Frustum width at depth 2 is 2 * 40 / 40 = 2 m; shift by half of it.
  const auto spec = wall(2.0);
  const auto a = with_depth(make_view(0, 40, 30, 40.0, looking_forward(Vec3(0, 0, 0))), spec);
  const auto b = with_depth(make_view(1, 40, 30, 40.0, looking_forward(Vec3(1.0, 0, 0))), spec);
  const double overlap = compute_overlap(a, b);
  EXPECT_NEAR(overlap, 0.5, 0.05);
  EXPECT_DOUBLE_EQ(overlap, compute_overlap(b, a));
}

TEST(Overlap, ExcludesHolesFromDenominator) {
  const auto spec = wall(2.0);
  auto a = with_depth(make_view(0, 10, 10, 10.0, looking_forward(Vec3(0, 0, 0))), spec);
  auto b = a;
  for (int u = 0; u < 10; ++u) a.depth[u] = 0.0f;  // top row of a is a hole
  // Every valid pixel of a maps into b; b's top row has no valid match in a.
  EXPECT_DOUBLE_EQ(compute_overlap(a, b), 0.9);
}

TEST(MinePairs, ExactThresholdIsExcluded) {
  // Ten columns, fx = 10 at depth 1: a 0.7 m shift keeps exactly 3 columns.
  const auto spec = wall(1.0);
  std::vector<CameraView> views = {
      with_depth(make_view(0, 10, 4, 10.0, looking_forward(Vec3(0, 0, 0))), spec),
      with_depth(make_view(1, 10, 4, 10.0, looking_forward(Vec3(0.7, 0, 0))), spec)};
  EXPECT_DOUBLE_EQ(compute_overlap(views[0], views[1]), 0.3);
  EXPECT_TRUE(mine_pairs(views, {1, 0.3, 0.05}).empty());
  const auto pairs = mine_pairs(views, {1, 0.29, 0.05});
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (ViewPair{0, 1, 0.3}));
}

TEST(MinePairs, StrideSubsamplesFrames) {
  const auto spec = wall(2.0);
  std::vector<CameraView> views;
  for (int i = 0; i < 50; ++i) views.push_back(with_depth(make_view(i, 8, 6, 8.0, Eigen::Matrix4d::Identity()), spec));
  const auto pairs = mine_pairs(views, {});
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (ViewPair{0, 25, 1.0}));

  views.resize(100, views.front());
  for (int i = 0; i < 100; ++i) views[i].view_id = i;
  const auto all = mine_pairs(views, {});
  EXPECT_EQ(all.size(), 6u);
  std::set<int> frames;
  for (const auto& p : all) {
    EXPECT_LT(p.view_m, p.view_n);
    frames.insert(p.view_m);
    frames.insert(p.view_n);
  }
  EXPECT_EQ(frames, (std::set<int>{0, 25, 50, 75}));
}

TEST(MinePairs, SingleViewGivesNothing) {
  const std::vector<CameraView> views = {with_depth(make_view(0, 8, 6, 8.0, Eigen::Matrix4d::Identity()), wall(2.0))};
  EXPECT_TRUE(mine_pairs(views, {}).empty());
  EXPECT_THROW(mine_pairs(views, {0, 0.3, 0.05}), InvalidArgument);
}

TEST(MatchIndex, IdenticalViewsPairEveryPoint) {
  const auto proj = square_projection(0, 10);
  auto other = proj;
  other.view_id = 1;
  const auto index = build_match_index(proj, other);
  EXPECT_EQ(index.set_tuples, (std::vector<SetTuple>{{0, 0, 1}}));
  ASSERT_EQ(index.pixel_pairs.size(), 100u);
  for (const auto& pair : index.pixel_pairs) EXPECT_EQ(pair.m, pair.n);
}

TEST(MatchIndex, MinPixelsGateAndOneSidedSets) {
  ViewProjection m{0, 10, 10, {}}, n{1, 10, 10, {}};
  for (int i = 0; i < 5; ++i) {
    m.sets[0].push_back({{i, 0}, static_cast<std::uint32_t>(i)});
    n.sets[0].push_back({{i, 1}, static_cast<std::uint32_t>(i)});
    m.sets[1].push_back({{i, 2}, static_cast<std::uint32_t>(10 + i)});
    m.sets[2].push_back({{i, 3}, static_cast<std::uint32_t>(20 + i)});
  }
  for (int i = 0; i < 4; ++i) n.sets[2].push_back({{i, 4}, static_cast<std::uint32_t>(20 + i)});
  const auto index = build_match_index(m, n, {5, 4096, 0});
  EXPECT_EQ(index.set_tuples, (std::vector<SetTuple>{{0, 0, 1}}));
  EXPECT_EQ(index.pixel_pairs.size(), 9u);  // set 2 points still pair
  EXPECT_EQ(build_match_index(m, n, {4, 4096, 0}).set_tuples.size(), 2u);
}

TEST(MatchIndex, CapSubsamplesReproducibly) {
  const auto proj = square_projection(0, 100);
  auto other = proj;
  other.view_id = 1;
  const MatchParams params{5, 4096, 42};
  const auto a = build_match_index(proj, other, params);
  const auto b = build_match_index(proj, other, params);
  EXPECT_EQ(a.pixel_pairs.size(), 4096u);
  EXPECT_EQ(a, b);
  std::set<std::uint32_t> points;
  for (const auto& p : a.pixel_pairs) points.insert(p.point);
  EXPECT_EQ(points.size(), 4096u);
  EXPECT_NE(build_match_index(proj, other, {5, 4096, 43}).pixel_pairs, a.pixel_pairs);
}

TEST(Camera, ValidateAndLookAt) {
  auto view = make_view(0, 4, 4, 4.0, look_at(Vec3(1, 2, 3), Vec3(0, 0, 0)));
  EXPECT_NO_THROW(validate(view));
  const Vec3 p(0.3, -0.2, 0.9);
  EXPECT_NEAR((view.to_world(view.to_camera(p)) - p).norm(), 0.0, 1e-12);
  EXPECT_GT(view.to_camera(Vec3::Zero()).z(), 0.0);

  auto bad = view;
  bad.fx = 0.0;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = view;
  bad.world_to_camera(0, 0) *= 1.01;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = view;
  bad.world_to_camera.row(0) *= -1.0;
  EXPECT_THROW(validate(bad), InvalidArgument);
  bad = view;
  bad.depth.assign(16, 1.0f);
  bad.depth[3] = -1.0f;
  EXPECT_THROW(validate(bad), InvalidArgument);
  EXPECT_THROW(look_at(Vec3(0, 0, 1), Vec3(0, 0, 0)), InvalidArgument);
}

TEST(RenderDepth, MatchesIndependentRayCast) {
  const auto spec = occluder_scene(1.0, 0.0, 0);
  const auto faces = scene_faces(spec);
  const auto view = make_view(0, 24, 20, 18.0, look_at(Vec3(1.2, -1.6, 1.9), Vec3(0, 0, 0.2)));
  const auto depth = render_depth(spec, view);
  for (int v = 0; v < view.height; ++v)
    for (int u = 0; u < view.width; ++u) {
      const double expected = pixel_zbuffer(faces, view, u, v);
      const float got = depth[static_cast<std::size_t>(v) * view.width + u];
      if (std::isinf(expected))
        EXPECT_EQ(got, 0.0f);
      else
        EXPECT_NEAR(got, expected, 1e-5);
    }
}
