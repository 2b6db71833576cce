#include "geoset/projection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "geoset/error.hpp"

namespace geoset {

std::size_t ViewProjection::pixel_count() const {
  std::size_t total = 0;
  for (const auto& [set, pixels] : sets) total += pixels.size();
  return total;
}

std::optional<PointProjection> project_point(const Vec3& p_world, const CameraView& view) {
  const Vec3 c = view.to_camera(p_world);
  if (!(c.z() > 0.0)) return std::nullopt;
  const double u = std::round(view.fx * c.x() / c.z() + view.cx);
  const double v = std::round(view.fy * c.y() / c.z() + view.cy);
  if (!(u >= 0.0 && v >= 0.0 && u < view.width && v < view.height)) return std::nullopt;
  return PointProjection{static_cast<int>(u), static_cast<int>(v), c.z()};
}

bool depth_validate(int u, int v, double z, const CameraView& view, double threshold) {
  const double stored = view.depth_at(u, v);
  return stored > 0.0 && std::abs(z - stored) <= threshold;
}

ViewProjection project_geo_sets(const PointCloud& cloud, const GeoSetPartition& partition,
                                const CameraView& view, double threshold) {
  if (partition.labels.size() != cloud.size())
    throw InvalidArgument("partition does not match the point cloud");
  if (!view.has_depth()) throw InvalidArgument("view " + std::to_string(view.view_id) + " has no depth");

  const std::size_t pixels = static_cast<std::size_t>(view.width) * view.height;
  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<double> nearest(pixels, std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> owner(pixels, kNone);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto hit = project_point(cloud.positions[i], view);
    if (!hit || !depth_validate(hit->u, hit->v, hit->z, view, threshold)) continue;
    const std::size_t index = static_cast<std::size_t>(hit->v) * view.width + hit->u;
    if (hit->z < nearest[index]) {
      nearest[index] = hit->z;
      owner[index] = static_cast<std::uint32_t>(i);
    }
  }

  ViewProjection out{view.view_id, view.width, view.height, {}};
  // Row-major traversal leaves every per-set list sorted.
  for (std::size_t index = 0; index < pixels; ++index) {
    const auto point = owner[index];
    if (point == kNone) continue;
    const Pixel px{static_cast<int>(index % view.width), static_cast<int>(index / view.width)};
    out.sets[partition.labels[point]].push_back({px, point});
  }
  return out;
}

namespace {

double directional_overlap(const CameraView& from, const CameraView& to, double threshold) {
  std::size_t valid = 0;
  std::size_t shared = 0;
  for (int v = 0; v < from.height; ++v) {
    for (int u = 0; u < from.width; ++u) {
      const double d = from.depth_at(u, v);
      if (!(d > 0.0)) continue;
      ++valid;
      const Vec3 world = from.to_world(from.backproject(u, v, d));
      const auto hit = project_point(world, to);
      if (hit && depth_validate(hit->u, hit->v, hit->z, to, threshold)) ++shared;
    }
  }
  return valid == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(valid);
}

}  // namespace

double compute_overlap(const CameraView& view_m, const CameraView& view_n, double threshold) {
  if (!view_m.has_depth() || !view_n.has_depth()) throw InvalidArgument("overlap needs depth in both views");
  return std::min(directional_overlap(view_m, view_n, threshold),
                  directional_overlap(view_n, view_m, threshold));
}

std::vector<ViewPair> mine_pairs(std::span<const CameraView> views, const PairMiningParams& params) {
  if (params.frame_stride < 1) throw InvalidArgument("frame_stride must be at least 1");
  std::vector<std::size_t> sampled;
  for (std::size_t i = 0; i < views.size(); i += static_cast<std::size_t>(params.frame_stride))
    sampled.push_back(i);

  std::vector<ViewPair> pairs;
  for (std::size_t a = 0; a < sampled.size(); ++a) {
    for (std::size_t b = a + 1; b < sampled.size(); ++b) {
      const auto& m = views[sampled[a]];
      const auto& n = views[sampled[b]];
      const double overlap = compute_overlap(m, n, params.depth_threshold);
      if (overlap > params.overlap_min) pairs.push_back({m.view_id, n.view_id, overlap});
    }
  }
  return pairs;
}

MatchIndex build_match_index(const ViewProjection& proj_m, const ViewProjection& proj_n,
                             const MatchParams& params) {
  MatchIndex index;
  index.view_m = proj_m.view_id;
  index.view_n = proj_n.view_id;

  for (const auto& [set, pixels_m] : proj_m.sets) {
    const auto it = proj_n.sets.find(set);
    if (it == proj_n.sets.end()) continue;
    if (pixels_m.size() >= params.min_pixels && it->second.size() >= params.min_pixels)
      index.set_tuples.push_back({set, proj_m.view_id, proj_n.view_id});
  }

  std::unordered_map<std::uint32_t, Pixel> in_n;
  for (const auto& [set, pixels] : proj_n.sets) {
    for (const auto& p : pixels) in_n.emplace(p.point, p.pixel);
  }
  std::vector<PixelPair> pairs;
  for (const auto& [set, pixels] : proj_m.sets) {
    for (const auto& p : pixels) {
      const auto it = in_n.find(p.point);
      if (it != in_n.end()) pairs.push_back({p.pixel, it->second, p.point});
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const PixelPair& a, const PixelPair& b) { return a.point < b.point; });

  if (pairs.size() > params.pixel_cap) {
    std::mt19937_64 rng(params.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < params.pixel_cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(params.pixel_cap);
    std::sort(order.begin(), order.end());
    std::vector<PixelPair> kept;
    kept.reserve(order.size());
    for (auto i : order) kept.push_back(pairs[i]);
    pairs = std::move(kept);
  }
  index.pixel_pairs = std::move(pairs);
  return index;
}

}  // namespace geoset
