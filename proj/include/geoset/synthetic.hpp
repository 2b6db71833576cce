#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "geoset/camera.hpp"
#include "geoset/geometry.hpp"

namespace geoset {

/// Rectangle origin + s * axis_u + t * axis_v for s, t in [0, 1]. The face
/// normal is normalize(axis_u x axis_v).
struct PlanePrimitive {
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double density = 400.0;  // points per square meter
};

/// Axis-aligned box rotated by `yaw` radians about +z. Produces six faces
/// with outward normals.
struct BoxPrimitive {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;
  double density = 400.0;
};

using Primitive = std::variant<PlanePrimitive, BoxPrimitive>;

struct SyntheticSceneSpec {
  std::vector<Primitive> primitives;
  double noise_sigma = 0.0;  // meters, applied along the face normal
  std::uint64_t seed = 0;
};

/// One planar rectangular face of a primitive.
struct SceneFace {
  Vec3 origin;
  Vec3 axis_u;
  Vec3 axis_v;
  Vec3 normal;
  double density = 0.0;
};

struct GeneratedScene {
  PointCloud cloud;  // positions and analytic normals; no edges
  std::vector<std::uint32_t> labels;  // generating face per point
};

/// Faces of every primitive in declaration order. Throws InvalidArgument for
/// non-positive extents or densities.
std::vector<SceneFace> scene_faces(const SyntheticSceneSpec& spec);

/// Samples every face on a regular grid of cell centers and perturbs points
/// along the face normal. Deterministic for a fixed seed.
GeneratedScene generate_scene(const SyntheticSceneSpec& spec);

/// Ray-cast depth map (camera-frame z at pixel centers) of the noiseless
/// scene surfaces. Pixels that hit nothing get 0.
std::vector<float> render_depth(const SyntheticSceneSpec& spec, const CameraView& view);

}  // namespace geoset
