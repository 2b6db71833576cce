#include "geoset/pipeline.hpp"

#include <string>

#include "geoset/error.hpp"
#include "geoset/io.hpp"

namespace geoset {
namespace {

Vec3 vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace

PipelineConfig pipeline_config_from_json(const Json& j) {
  if (!j.contains("seed")) throw InvalidArgument("pipeline config requires a 'seed' field");
  PipelineConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();

  Json scene = j.at("scene");
  if (!scene.contains("seed")) scene["seed"] = c.seed;
  c.scene = scene_spec_from_json(scene);

  const auto& cams = j.at("cameras");
  c.rig.width = cams.value("width", c.rig.width);
  c.rig.height = cams.value("height", c.rig.height);
  c.rig.fx = cams.value("fx", c.rig.fx);
  c.rig.fy = cams.value("fy", c.rig.fy);
  c.rig.cx = cams.value("cx", (c.rig.width - 1) / 2.0);
  c.rig.cy = cams.value("cy", (c.rig.height - 1) / 2.0);
  if (cams.contains("up")) c.rig.up = vec3(cams.at("up"));
  for (const auto& pose : cams.at("poses")) c.rig.poses.emplace_back(vec3(pose.at("eye")), vec3(pose.at("target")));

  c.knn = j.value("knn", c.knn);
  if (j.contains("segmentation")) c.segmentation = segmentation_params_from_json(j.at("segmentation"));

  if (j.contains("projection")) {
    const auto& p = j.at("projection");
    c.projection.depth_threshold = p.value("depth_threshold", c.projection.depth_threshold);
    c.projection.mining.depth_threshold = c.projection.depth_threshold;
    c.projection.mining.frame_stride = p.value("frame_stride", c.projection.mining.frame_stride);
    c.projection.mining.overlap_min = p.value("overlap_min", c.projection.mining.overlap_min);
    c.projection.match.min_pixels = p.value("min_pixels", c.projection.match.min_pixels);
    c.projection.match.pixel_cap = p.value("pixel_cap", c.projection.match.pixel_cap);
  }
  c.projection.match.seed = c.seed;

  Json train = j.value("train", Json::object());
  if (!train.contains("seed")) train["seed"] = c.seed;
  c.train = train_config_from_json(train);

  if (j.contains("metrics")) c.epsilon = j.at("metrics").value("epsilon", c.epsilon);
  return c;
}

Json pipeline_config_to_json(const PipelineConfig& c) {
  Json poses = Json::array();
  for (const auto& [eye, target] : c.rig.poses) poses.push_back({{"eye", vec3_json(eye)}, {"target", vec3_json(target)}});
  return {{"seed", c.seed},
          {"scene", scene_spec_to_json(c.scene)},
          {"cameras",
           {{"width", c.rig.width}, {"height", c.rig.height}, {"fx", c.rig.fx}, {"fy", c.rig.fy},
            {"cx", c.rig.cx}, {"cy", c.rig.cy}, {"up", vec3_json(c.rig.up)}, {"poses", poses}}},
          {"knn", c.knn},
          {"segmentation", segmentation_params_to_json(c.segmentation)},
          {"projection",
           {{"depth_threshold", c.projection.depth_threshold},
            {"frame_stride", c.projection.mining.frame_stride},
            {"overlap_min", c.projection.mining.overlap_min},
            {"min_pixels", c.projection.match.min_pixels},
            {"pixel_cap", c.projection.match.pixel_cap}}},
          {"train", train_config_to_json(c.train)},
          {"metrics", {{"epsilon", c.epsilon}}}};
}

std::vector<CameraView> render_views(const SyntheticSceneSpec& scene, const CameraRig& rig) {
  std::vector<CameraView> views;
  for (std::size_t i = 0; i < rig.poses.size(); ++i) {
    CameraView view;
    view.view_id = static_cast<int>(i);
    view.fx = rig.fx;
    view.fy = rig.fy;
    view.cx = rig.cx;
    view.cy = rig.cy;
    view.width = rig.width;
    view.height = rig.height;
    view.world_to_camera = look_at(rig.poses[i].first, rig.poses[i].second, rig.up);
    validate(view);
    view.depth = render_depth(scene, view);
    views.push_back(std::move(view));
  }
  return views;
}

std::vector<MatchIndex> build_matches(const ProjectedGeoSets& projections, std::span<const ViewPair> pairs,
                                      const MatchParams& params) {
  std::vector<MatchIndex> matches;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto m = projections.find(pairs[i].view_m);
    const auto n = projections.find(pairs[i].view_n);
    if (m == projections.end() || n == projections.end())
      throw InvalidArgument("pair (" + std::to_string(pairs[i].view_m) + ", " + std::to_string(pairs[i].view_n) +
                            ") references a view without projections");
    MatchParams pair_params = params;
    pair_params.seed = params.seed + i;
    matches.push_back(build_match_index(m->second, n->second, pair_params));
  }
  return matches;
}

PreparedViews prepare_views(const PointCloud& cloud, const GeoSetPartition& partition,
                            std::span<const CameraView> views, const ProjectionParams& params) {
  PreparedViews out;
  for (const auto& view : views)
    out.projections.emplace(view.view_id, project_geo_sets(cloud, partition, view, params.depth_threshold));
  out.pairs = mine_pairs(views, params.mining);
  out.matches = build_matches(out.projections, out.pairs, params.match);
  return out;
}

PreparedScene prepare_scene(const PipelineConfig& config) {
  PreparedScene out;
  out.scene = generate_scene(config.scene);
  out.scene.cloud.edges = build_knn_graph(out.scene.cloud, config.knn);
  out.partition = segment(out.scene.cloud, config.segmentation);
  out.views = render_views(config.scene, config.rig);
  out.prepared = prepare_views(out.scene.cloud, out.partition, out.views, config.projection);
  return out;
}

}  // namespace geoset
