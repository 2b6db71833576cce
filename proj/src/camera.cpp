#include "geoset/camera.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "geoset/error.hpp"

namespace geoset {

Vec3 CameraView::to_camera(const Vec3& world) const {
  return world_to_camera.topLeftCorner<3, 3>() * world + world_to_camera.topRightCorner<3, 1>();
}

Vec3 CameraView::to_world(const Vec3& camera) const {
  const Eigen::Matrix3d rotation = world_to_camera.topLeftCorner<3, 3>();
  return rotation.transpose() * (camera - world_to_camera.topRightCorner<3, 1>());
}

Vec3 CameraView::backproject(int u, int v, double z) const {
  return {(u - cx) * z / fx, (v - cy) * z / fy, z};
}

void validate(const CameraView& view) {
  if (!(view.fx > 0.0) || !(view.fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (view.width <= 0 || view.height <= 0) throw InvalidArgument("image size must be positive");
  if (!view.depth.empty() && !view.has_depth())
    throw InvalidArgument("depth map size does not match the image size");
  for (float d : view.depth) {
    if (!(d >= 0.0f)) throw InvalidArgument("depth values must be non-negative");
  }
  const Eigen::Matrix3d rotation = view.world_to_camera.topLeftCorner<3, 3>();
  if (!(((rotation * rotation.transpose()) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-5))
    throw InvalidArgument("world_to_camera rotation is not orthonormal");
  if (rotation.determinant() < 0.0) throw InvalidArgument("world_to_camera is not right-handed");
  const Eigen::RowVector4d last = view.world_to_camera.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidArgument("world_to_camera last row must be (0, 0, 0, 1)");
}

Eigen::Matrix4d look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) throw InvalidArgument("look_at: view direction is parallel to up");
  right.normalize();
  const Vec3 down = forward.cross(right);

  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  pose.block<1, 3>(0, 0) = right.transpose();
  pose.block<1, 3>(1, 0) = down.transpose();
  pose.block<1, 3>(2, 0) = forward.transpose();
  pose.topRightCorner<3, 1>() = -(pose.topLeftCorner<3, 3>() * eye);
  return pose;
}

}  // namespace geoset
