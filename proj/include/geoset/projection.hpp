#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "geoset/camera.hpp"
#include "geoset/geometry.hpp"
#include "geoset/segmentation.hpp"
#include "geoset/types.hpp"

namespace geoset {

inline constexpr double kDefaultDepthThreshold = 0.05;  // meters

struct PointProjection {
  int u = 0;
  int v = 0;
  double z = 0.0;
};

/// Pinhole projection rounded to the nearest pixel. Empty when the point is
/// behind the camera or lands outside the image.
std::optional<PointProjection> project_point(const Vec3& p_world, const CameraView& view);

/// True iff the stored depth at (u, v) is positive and within `threshold`
/// of z.
bool depth_validate(int u, int v, double z, const CameraView& view,
                    double threshold = kDefaultDepthThreshold);

/// Projects every point, keeps depth-valid hits and resolves pixel conflicts
/// in favor of the nearer point (smaller index on exact ties).
ViewProjection project_geo_sets(const PointCloud& cloud, const GeoSetPartition& partition,
                                const CameraView& view,
                                double threshold = kDefaultDepthThreshold);

/// Fraction of valid-depth pixels of one view that reproject depth-consistently
/// into the other, minimized over both directions.
double compute_overlap(const CameraView& view_m, const CameraView& view_n,
                       double threshold = kDefaultDepthThreshold);

struct ViewPair {
  int view_m = 0;
  int view_n = 0;
  double overlap = 0.0;

  bool operator==(const ViewPair&) const = default;
};

struct PairMiningParams {
  int frame_stride = 25;
  double overlap_min = 0.3;
  double depth_threshold = kDefaultDepthThreshold;
};

/// Keeps every `frame_stride`-th view and returns all pairs (m < n in
/// sequence order) whose overlap strictly exceeds `overlap_min`.
std::vector<ViewPair> mine_pairs(std::span<const CameraView> views,
                                 const PairMiningParams& params = {});

struct MatchParams {
  std::uint32_t min_pixels = 5;
  std::size_t pixel_cap = 4096;
  std::uint64_t seed = 0;
};

/// Set tuples for sets with at least `min_pixels` pixels in both views, and
/// pixel pairs for every 3D point that survived projection into both views
/// (uniformly subsampled to `pixel_cap`).
MatchIndex build_match_index(const ViewProjection& proj_m, const ViewProjection& proj_n,
                             const MatchParams& params = {});

}  // namespace geoset
