#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "geoset/geometry.hpp"
#include "geoset/types.hpp"

namespace geoset {

/// Posed pinhole view. The camera looks down +z with x to the right and y
/// down; `world_to_camera` is a rigid transform. Depth is stored row-major
/// in meters, with 0 marking an invalid measurement.
struct CameraView {
  int view_id = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Eigen::Matrix4d world_to_camera = Eigen::Matrix4d::Identity();
  std::vector<float> depth;

  bool has_depth() const noexcept {
    return width > 0 && height > 0 && depth.size() == static_cast<std::size_t>(width) * height;
  }
  bool in_bounds(int u, int v) const noexcept { return u >= 0 && v >= 0 && u < width && v < height; }
  float depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }

  Vec3 to_camera(const Vec3& world) const;
  Vec3 to_world(const Vec3& camera) const;
  /// Camera-frame point for pixel (u, v) at depth z.
  Vec3 backproject(int u, int v, double z) const;

  bool operator==(const CameraView&) const = default;
};

/// Throws InvalidArgument unless focal lengths are positive, depth values are
/// non-negative and the rotation block is orthonormal within 1e-5.
void validate(const CameraView& view);

/// Rigid world-to-camera transform for a camera at `eye` looking at `target`.
/// `up` is the world up direction; image rows increase against it.
Eigen::Matrix4d look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

}  // namespace geoset
