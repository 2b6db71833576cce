#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "geoset/camera.hpp"
#include "geoset/projection.hpp"
#include "geoset/segmentation.hpp"
#include "geoset/synthetic.hpp"
#include "geoset/trainer.hpp"

namespace geoset {

/// Shared intrinsics and a list of (eye, target) poses.
struct CameraRig {
  int width = 32;
  int height = 32;
  double fx = 28.0;
  double fy = 28.0;
  double cx = 15.5;
  double cy = 15.5;
  Vec3 up = Vec3::UnitZ();
  std::vector<std::pair<Vec3, Vec3>> poses;
};

struct ProjectionParams {
  double depth_threshold = kDefaultDepthThreshold;
  PairMiningParams mining;
  MatchParams match;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  SyntheticSceneSpec scene;
  CameraRig rig;
  int knn = 8;
  SegmentationParams segmentation;
  ProjectionParams projection;
  TrainConfig train;
  double epsilon = 0.5;
};

/// Parses a pipeline config. "seed" is mandatory and seeds every stage that
/// does not carry its own seed.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);

/// Posed views of the rig with ray-cast depth of the synthetic scene.
std::vector<CameraView> render_views(const SyntheticSceneSpec& scene, const CameraRig& rig);

/// Projections of every view and match indices of every mined pair.
struct PreparedViews {
  ProjectedGeoSets projections;
  std::vector<ViewPair> pairs;
  std::vector<MatchIndex> matches;
};

PreparedViews prepare_views(const PointCloud& cloud, const GeoSetPartition& partition,
                            std::span<const CameraView> views, const ProjectionParams& params);

/// Match indices for already-mined pairs. Throws when a pair names a view
/// without projections.
std::vector<MatchIndex> build_matches(const ProjectedGeoSets& projections,
                                      std::span<const ViewPair> pairs, const MatchParams& params);

/// Everything the synthetic pipeline produces before training.
struct PreparedScene {
  GeneratedScene scene;  // cloud carries the k-NN edges
  GeoSetPartition partition;
  std::vector<CameraView> views;
  PreparedViews prepared;
};

PreparedScene prepare_scene(const PipelineConfig& config);

}  // namespace geoset
