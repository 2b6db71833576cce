#pragma once

#include <cstdint>
#include <vector>

#include "geoset/geometry.hpp"

namespace geoset {

struct SegmentationParams {
  double k_threshold = 0.05;
  std::uint32_t min_size = 20;
  bool convexity_relaxation = false;
};

/// Disjoint labeling of points into geometric consistency sets. Labels are
/// dense in [0, set_count) and numbered in order of first appearance.
struct GeoSetPartition {
  std::vector<std::uint32_t> labels;
  std::uint32_t set_count = 0;

  std::vector<std::uint32_t> set_sizes() const;
  bool operator==(const GeoSetPartition&) const = default;
};

/// Throws InvalidArgument unless labels are dense in [0, set_count) and
/// every set is non-empty.
void validate(const GeoSetPartition& partition);

/// Dissimilarity of two surface samples: 1 - n_i . n_j, squared on locally
/// convex edges when `convexity_relaxation` is set.
double edge_weight(const Vec3& n_i, const Vec3& n_j, const Vec3& p_i, const Vec3& p_j,
                   bool convexity_relaxation);

/// Graph-based over-segmentation: greedy union-find over edges sorted by
/// weight, merging two components when the edge weight does not exceed
/// either component's internal difference plus k / |C|. Components smaller
/// than `min_size` are then merged across their cheapest crossing edge.
/// Never merges across connected components.
GeoSetPartition segment(const PointCloud& cloud, const SegmentationParams& params);

}  // namespace geoset
