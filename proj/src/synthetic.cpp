#include "geoset/synthetic.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <random>

#include "geoset/error.hpp"

namespace geoset {
namespace {

SceneFace make_face(const Vec3& origin, const Vec3& u, const Vec3& v, double density) {
  if (!(u.norm() > 0.0) || !(v.norm() > 0.0)) throw InvalidArgument("primitive extents must be positive");
  if (!(density > 0.0)) throw InvalidArgument("primitive density must be positive");
  if (std::abs(u.normalized().dot(v.normalized())) > 1e-6)
    throw InvalidArgument("plane axes must be orthogonal");
  return {origin, u, v, u.cross(v).normalized(), density};
}

void append_faces(const PlanePrimitive& plane, std::vector<SceneFace>& out) {
  out.push_back(make_face(plane.origin, plane.axis_u, plane.axis_v, plane.density));
}

void append_faces(const BoxPrimitive& box, std::vector<SceneFace>& out) {
  if (!(box.size.minCoeff() > 0.0)) throw InvalidArgument("box size must be positive");
  const Eigen::Matrix3d r = Eigen::AngleAxisd(box.yaw, Vec3::UnitZ()).toRotationMatrix();
  const Vec3 h = box.size / 2.0;
  const Vec3 ex = r * Vec3(2 * h.x(), 0, 0);
  const Vec3 ey = r * Vec3(0, 2 * h.y(), 0);
  const Vec3 ez = r * Vec3(0, 0, 2 * h.z());
  auto corner = [&](double sx, double sy, double sz) {
    return Vec3(box.center + r * Vec3(sx * h.x(), sy * h.y(), sz * h.z()));
  };
  const double d = box.density;
  out.push_back(make_face(corner(+1, -1, -1), ey, ez, d));  // +x
  out.push_back(make_face(corner(-1, -1, -1), ez, ey, d));  // -x
  out.push_back(make_face(corner(-1, +1, -1), ez, ex, d));  // +y
  out.push_back(make_face(corner(-1, -1, -1), ex, ez, d));  // -y
  out.push_back(make_face(corner(-1, -1, +1), ex, ey, d));  // +z
  out.push_back(make_face(corner(-1, -1, -1), ey, ex, d));  // -z
}

}  // namespace

std::vector<SceneFace> scene_faces(const SyntheticSceneSpec& spec) {
  std::vector<SceneFace> faces;
  for (const auto& primitive : spec.primitives) {
    std::visit([&](const auto& p) { append_faces(p, faces); }, primitive);
  }
  return faces;
}

GeneratedScene generate_scene(const SyntheticSceneSpec& spec) {
  if (spec.primitives.empty()) throw InvalidArgument("scene has no primitives");
  if (!(spec.noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be non-negative");
  const auto faces = scene_faces(spec);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  GeneratedScene scene;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const SceneFace& face = faces[f];
    const double step = 1.0 / std::sqrt(face.density);
    const auto nu = std::max<long>(1, std::lround(face.axis_u.norm() / step));
    const auto nv = std::max<long>(1, std::lround(face.axis_v.norm() / step));
    for (long j = 0; j < nv; ++j) {
      for (long i = 0; i < nu; ++i) {
        Vec3 p = face.origin + (i + 0.5) / nu * face.axis_u + (j + 0.5) / nv * face.axis_v;
        if (spec.noise_sigma > 0.0) p += spec.noise_sigma * noise(rng) * face.normal;
        scene.cloud.positions.push_back(p);
        scene.cloud.normals.push_back(face.normal);
        scene.labels.push_back(static_cast<std::uint32_t>(f));
      }
    }
  }
  return scene;
}

std::vector<float> render_depth(const SyntheticSceneSpec& spec, const CameraView& view) {
  const auto faces = scene_faces(spec);
  const Eigen::Matrix3d to_world = view.world_to_camera.topLeftCorner<3, 3>().transpose();
  const Vec3 center = view.to_world(Vec3::Zero());

  std::vector<float> depth(static_cast<std::size_t>(view.width) * view.height, 0.0f);
  for (int v = 0; v < view.height; ++v) {
    for (int u = 0; u < view.width; ++u) {
      // Camera-frame ray with unit z, so the hit parameter equals depth.
      const Vec3 dir = to_world * Vec3((u - view.cx) / view.fx, (v - view.cy) / view.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& face : faces) {
        const double denom = face.normal.dot(dir);
        if (std::abs(denom) < 1e-12) continue;
        const double t = face.normal.dot(face.origin - center) / denom;
        if (!(t > 0.0) || t >= best) continue;
        const Vec3 local = center + t * dir - face.origin;
        const double s = local.dot(face.axis_u) / face.axis_u.squaredNorm();
        const double r = local.dot(face.axis_v) / face.axis_v.squaredNorm();
        if (s < 0.0 || s > 1.0 || r < 0.0 || r > 1.0) continue;
        best = t;
      }
      if (std::isfinite(best)) depth[static_cast<std::size_t>(v) * view.width + u] = static_cast<float>(best);
    }
  }
  return depth;
}

}  // namespace geoset
