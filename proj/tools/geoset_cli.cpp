// geoset: command-line driver for every pipeline stage.
//
// Each subcommand reads its inputs, writes its artifacts and prints a JSON
// summary on stdout. Failures print {"error": {...}} on stdout and exit
// nonzero.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "geoset/error.hpp"
#include "geoset/geometry.hpp"
#include "geoset/io.hpp"
#include "geoset/metrics.hpp"
#include "geoset/pipeline.hpp"
#include "geoset/ply.hpp"
#include "geoset/projection.hpp"
#include "geoset/segmentation.hpp"
#include "geoset/trainer.hpp"

namespace {

using namespace geoset;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, CommonArgs& args, bool with_seed, bool out_required = true) {
  app->add_option("--config", args.config, "JSON configuration file")->check(CLI::ExistingFile);
  if (with_seed) app->add_option("--seed", args.seed, "Random seed; overrides every seed in the config");
  auto* out = app->add_option("--out", args.out, "Output path");
  if (out_required) out->required();
}

Json load_config(const CommonArgs& args) { return args.config.empty() ? Json::object() : read_json(args.config); }

// A stage config may be given on its own or as the matching section of a
// pipeline config.
Json section(const Json& config, const char* name) {
  if (config.contains(name) && config.at(name).is_object()) return config.at(name);
  return config;
}

void emit(const Json& summary) { std::cout << summary.dump() << std::endl; }

int report_error(const std::string& kind, const std::string& message, const std::string& path = {},
                 std::optional<std::uint64_t> offset = std::nullopt, int code = kExitFailure) {
  Json record = {{"type", kind}, {"message", message}};
  if (!path.empty()) record["path"] = path;
  if (offset) record["offset"] = *offset;
  std::cout << Json{{"error", record}}.dump() << std::endl;
  return code;
}

std::optional<std::uint64_t> json_byte_offset(const nlohmann::json::exception& e) {
  if (const auto* parse = dynamic_cast<const nlohmann::json::parse_error*>(&e)) return parse->byte;
  return std::nullopt;
}

Json set_sizes_json(const GeoSetPartition& partition) {
  Json sizes = Json::array();
  for (auto size : partition.set_sizes()) sizes.push_back(size);
  return sizes;
}

PointCloud prepare_cloud(PointCloud cloud, int knn, bool& estimated_normals, bool& built_edges) {
  estimated_normals = false;
  built_edges = false;
  if (cloud.edges.empty()) {
    cloud.edges = build_knn_graph(cloud, knn);
    built_edges = true;
  }
  if (!cloud.has_normals()) {
    auto edges = std::move(cloud.edges);
    cloud = estimate_normals(cloud, knn).cloud;
    cloud.edges = std::move(edges);
    estimated_normals = true;
  }
  return cloud;
}

// gen-scene ----------------------------------------------------------------

struct GenSceneArgs : CommonArgs {};

int run_gen_scene(const GenSceneArgs& args) {
  Json j = load_config(args);
  if (args.seed) j["seed"] = *args.seed;
  if (!j.contains("seed")) throw InvalidArgument("config requires a 'seed' field (or pass --seed)");
  if (args.seed && j.contains("scene")) j["scene"].erase("seed");
  const PipelineConfig config = pipeline_config_from_json(j);

  const fs::path out = args.out;
  GeneratedScene scene = generate_scene(config.scene);
  scene.cloud.edges = build_knn_graph(scene.cloud, config.knn);
  const auto views = render_views(config.scene, config.rig);
  write_ply(out / "scene.ply", scene.cloud);
  write_labels(out / "faces.gsl", scene.labels);
  write_cameras(out / "cameras.json", views);

  emit({{"command", "gen-scene"},
        {"points", scene.cloud.size()},
        {"edges", scene.cloud.edges.size()},
        {"faces", scene_faces(config.scene).size()},
        {"views", views.size()},
        {"outputs", {{"cloud", (out / "scene.ply").string()},
                     {"face_labels", (out / "faces.gsl").string()},
                     {"cameras", (out / "cameras.json").string()}}}});
  return 0;
}

// segment ------------------------------------------------------------------

struct SegmentArgs : CommonArgs {
  std::string input;
  std::optional<double> k;
  std::optional<std::uint32_t> min_size;
  std::optional<int> knn;
  bool convexity = false;
};

int run_segment(const SegmentArgs& args) {
  const Json config = load_config(args);
  SegmentationParams params = segmentation_params_from_json(section(config, "segmentation"));
  if (args.k) params.k_threshold = *args.k;
  if (args.min_size) params.min_size = *args.min_size;
  if (args.convexity) params.convexity_relaxation = true;
  const int knn = args.knn.value_or(config.value("knn", 8));

  bool estimated = false;
  bool built = false;
  const PointCloud cloud = prepare_cloud(read_ply(args.input), knn, estimated, built);
  const GeoSetPartition partition = segment(cloud, params);
  write_labels(args.out, partition.labels);

  emit({{"command", "segment"},
        {"points", cloud.size()},
        {"edges", cloud.edges.size()},
        {"estimated_normals", estimated},
        {"built_knn_edges", built},
        {"set_count", partition.set_count},
        {"set_sizes", set_sizes_json(partition)},
        {"params", segmentation_params_to_json(params)},
        {"outputs", {{"labels", args.out}}}});
  return 0;
}

// project ------------------------------------------------------------------

struct ProjectArgs : CommonArgs {
  std::string cloud;
  std::string labels;
  std::string cameras;
  std::string depth_format = "f32";
  std::optional<double> depth_threshold;
};

int run_project(const ProjectArgs& args) {
  const Json config = section(load_config(args), "projection");
  const double threshold = args.depth_threshold.value_or(config.value("depth_threshold", kDefaultDepthThreshold));

  const PointCloud cloud = read_ply(args.cloud);
  const auto labels = read_labels(args.labels);
  if (labels.size() != cloud.size())
    throw IoError(args.labels, "label count " + std::to_string(labels.size()) + " does not match " +
                                   std::to_string(cloud.size()) + " points");
  const GeoSetPartition partition = partition_from_labels(labels);
  const auto views = read_cameras(args.cameras, depth_format_from_string(args.depth_format));

  ProjectedGeoSets projections;
  Json per_view = Json::array();
  for (const auto& view : views) {
    auto projection = project_geo_sets(cloud, partition, view, threshold);
    per_view.push_back({{"view_id", view.view_id}, {"sets", projection.sets.size()}, {"pixels", projection.pixel_count()}});
    projections.emplace(view.view_id, std::move(projection));
  }
  write_projections(args.out, projections);

  emit({{"command", "project"},
        {"views", per_view},
        {"depth_threshold", threshold},
        {"outputs", {{"projections", args.out}}}});
  return 0;
}

// mine-pairs ---------------------------------------------------------------

struct MinePairsArgs : CommonArgs {
  std::string cameras;
  std::string depth_format = "f32";
  std::optional<double> overlap_min;
  std::optional<int> stride;
};

int run_mine_pairs(const MinePairsArgs& args) {
  const Json config = section(load_config(args), "projection");
  PairMiningParams params;
  params.frame_stride = args.stride.value_or(config.value("frame_stride", params.frame_stride));
  params.overlap_min = args.overlap_min.value_or(config.value("overlap_min", params.overlap_min));
  params.depth_threshold = config.value("depth_threshold", params.depth_threshold);

  const auto views = read_cameras(args.cameras, depth_format_from_string(args.depth_format));
  const auto pairs = mine_pairs(views, params);
  write_json(args.out, pairs_to_json(pairs));

  emit({{"command", "mine-pairs"},
        {"views", views.size()},
        {"pair_count", pairs.size()},
        {"pairs", pairs_to_json(pairs).at("pairs")},
        {"outputs", {{"pairs", args.out}}}});
  return 0;
}

// train --------------------------------------------------------------------

struct TrainArgs : CommonArgs {
  std::string projections;
  std::string pairs;
  std::string point_features;
};

MatchParams match_params(const Json& config, std::uint64_t seed) {
  const Json p = section(config, "projection");
  MatchParams params;
  params.min_pixels = p.value("min_pixels", params.min_pixels);
  params.pixel_cap = p.value("pixel_cap", params.pixel_cap);
  params.seed = seed;
  return params;
}

Json cohesion_json(const EmbeddingTable& table, const ProjectedGeoSets& projections) {
  const auto [intra, cross] = evaluate_cohesion(table, projections);
  return {{"intra_set_cosine", intra}, {"cross_set_cosine", cross}};
}

int run_train(const TrainArgs& args) {
  const Json config = load_config(args);
  Json train_json = section(config, "train");
  if (args.seed) train_json["seed"] = *args.seed;
  if (!train_json.contains("seed") && config.contains("seed")) train_json["seed"] = config.at("seed");
  const TrainConfig train = train_config_from_json(train_json);

  TrainDataset dataset;
  dataset.projections = read_projections(args.projections);
  const auto pairs = pairs_from_json(read_json(args.pairs));
  dataset.pairs = build_matches(dataset.projections, pairs, match_params(config, train.seed));
  if (!args.point_features.empty()) dataset.point_features = read_point_features(args.point_features);

  const TrainResult result = run_two_stage(dataset, train);
  const fs::path out = args.out;
  write_embeddings(out / "embeddings.f32", result.table);
  write_log(out / "train_log.jsonl", result.log);

  emit({{"command", "train"},
        {"pairs", dataset.pairs.size()},
        {"steps", result.log.size()},
        {"final", cohesion_json(result.table, dataset.projections)},
        {"config", train_config_to_json(train)},
        {"outputs", {{"embeddings", (out / "embeddings.f32").string()},
                     {"log", (out / "train_log.jsonl").string()}}}});
  return 0;
}

// metrics ------------------------------------------------------------------

struct MetricsArgs : CommonArgs {
  std::string embeddings;
  std::string projections;
  std::optional<double> epsilon;
};

struct ImageMetrics {
  Json records = Json::array();
  double mean_coding_rate = 0.0;
  double mean_intra = 0.0;
};

ImageMetrics image_metrics(const EmbeddingTable& table, const ProjectedGeoSets& projections, double epsilon,
                           const std::optional<fs::path>& pca_dir) {
  ImageMetrics m;
  for (const auto& [id, projection] : projections) {
    const auto it = table.views.find(id);
    if (it == table.views.end()) throw InvalidArgument("no embeddings for view " + std::to_string(id));
    const FeatureMap f = normalize(it->second);
    const double rate = per_image_coding_rate(f, set_label_map(projection), epsilon);
    const double intra = intra_set_cosine(f, projection);
    m.records.push_back({{"image_id", id}, {"coding_rate", rate}, {"intra_set_cosine", intra}, {"epsilon", epsilon}});
    m.mean_coding_rate += rate;
    m.mean_intra += intra;
    if (pca_dir) {
      char name[32];
      std::snprintf(name, sizeof(name), "view_%06d.ppm", id);
      write_ppm(*pca_dir / name, f.height(), f.width(), pca_embed(f));
    }
  }
  if (!projections.empty()) {
    m.mean_coding_rate /= static_cast<double>(projections.size());
    m.mean_intra /= static_cast<double>(projections.size());
  }
  return m;
}

void write_jsonl(const fs::path& path, const Json& records) {
  std::string text;
  for (const auto& r : records) text += r.dump() + "\n";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

int run_metrics(const MetricsArgs& args) {
  const Json config = section(load_config(args), "metrics");
  const double epsilon = args.epsilon.value_or(config.value("epsilon", kDefaultCodingEpsilon));
  const EmbeddingTable table = read_embeddings(args.embeddings);
  const ProjectedGeoSets projections = read_projections(args.projections);

  const fs::path out = args.out;
  const auto m = image_metrics(table, projections, epsilon, out / "pca");
  write_jsonl(out / "metrics.jsonl", m.records);

  emit({{"command", "metrics"},
        {"images", m.records.size()},
        {"mean_coding_rate", m.mean_coding_rate},
        {"mean_intra_set_cosine", m.mean_intra},
        {"epsilon", epsilon},
        {"outputs", {{"metrics", (out / "metrics.jsonl").string()}, {"pca", (out / "pca").string()}}}});
  return 0;
}

// pipeline -----------------------------------------------------------------

struct PipelineArgs : CommonArgs {};

int run_pipeline(const PipelineArgs& args) {
  if (args.config.empty()) throw InvalidArgument("pipeline requires --config");
  Json j = load_config(args);
  if (args.seed) {
    j["seed"] = *args.seed;
    for (const char* name : {"scene", "train"})
      if (j.contains(name)) j[name].erase("seed");
  }
  const PipelineConfig config = pipeline_config_from_json(j);
  const fs::path out = args.out;

  const PreparedScene prepared = prepare_scene(config);
  write_json(out / "config.json", pipeline_config_to_json(config));
  write_ply(out / "scene.ply", prepared.scene.cloud);
  write_labels(out / "faces.gsl", prepared.scene.labels);
  write_labels(out / "labels.gsl", prepared.partition.labels);
  write_cameras(out / "cameras.json", prepared.views);
  write_projections(out / "projections.gsp", prepared.prepared.projections);
  write_json(out / "pairs.json", pairs_to_json(prepared.prepared.pairs));

  TrainDataset dataset{prepared.prepared.projections, prepared.prepared.matches, std::nullopt};
  const EmbeddingTable initial =
      init_embeddings(dataset.projections, config.train.channels, config.train.init_scale, config.train.seed);
  const TrainResult result = run_two_stage(dataset, config.train, initial);
  write_embeddings(out / "embeddings.f32", result.table);
  write_log(out / "train_log.jsonl", result.log);
  // Final metrics describe the stored float32 embeddings, as `metrics` would.
  const EmbeddingTable stored = read_embeddings(out / "embeddings.f32");

  const auto before = image_metrics(initial, dataset.projections, config.epsilon, std::nullopt);
  const auto after = image_metrics(stored, dataset.projections, config.epsilon, out / "pca");
  write_jsonl(out / "metrics.jsonl", after.records);

  const auto [intra0, cross0] = evaluate_cohesion(initial, dataset.projections);
  const auto [intra, cross] = evaluate_cohesion(stored, dataset.projections);
  const Json summary = {{"command", "pipeline"},
                        {"seed", config.seed},
                        {"points", prepared.scene.cloud.size()},
                        {"set_count", prepared.partition.set_count},
                        {"views", prepared.views.size()},
                        {"pair_count", prepared.prepared.pairs.size()},
                        {"steps", result.log.size()},
                        {"initial", {{"intra_set_cosine", intra0},
                                     {"cross_set_cosine", cross0},
                                     {"mean_coding_rate", before.mean_coding_rate}}},
                        {"intra_set_cosine", intra},
                        {"cross_set_cosine", cross},
                        {"mean_coding_rate", after.mean_coding_rate}};
  write_json(out / "summary.json", summary);
  emit(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric-set contrastive pre-training pipeline"};
  app.require_subcommand(1);

  GenSceneArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-scene", "Sample a synthetic scene and render its views");
  add_common(gen_cmd, gen, true);

  SegmentArgs seg;
  auto* seg_cmd = app.add_subcommand("segment", "Over-segment a point cloud into geometric sets");
  add_common(seg_cmd, seg, false);
  seg_cmd->add_option("--input", seg.input, "PLY point cloud")->required()->check(CLI::ExistingFile);
  seg_cmd->add_option("--k", seg.k, "Merge threshold k");
  seg_cmd->add_option("--min-size", seg.min_size, "Minimum set size");
  seg_cmd->add_option("--knn", seg.knn, "Neighbors for missing normals or edges");
  seg_cmd->add_flag("--convexity-relaxation", seg.convexity, "Square weights on convex edges");

  ProjectArgs proj;
  auto* proj_cmd = app.add_subcommand("project", "Project geometric sets into every view");
  add_common(proj_cmd, proj, false);
  proj_cmd->add_option("--cloud", proj.cloud, "PLY point cloud")->required()->check(CLI::ExistingFile);
  proj_cmd->add_option("--labels", proj.labels, "Set labels (GSL1)")->required()->check(CLI::ExistingFile);
  proj_cmd->add_option("--cameras", proj.cameras, "Cameras JSON")->required()->check(CLI::ExistingFile);
  proj_cmd->add_option("--depth-format", proj.depth_format, "f32 or png16");
  proj_cmd->add_option("--depth-threshold", proj.depth_threshold, "Depth agreement threshold (m)");

  MinePairsArgs mine;
  auto* mine_cmd = app.add_subcommand("mine-pairs", "Mine overlapping view pairs");
  add_common(mine_cmd, mine, false);
  mine_cmd->add_option("--cameras", mine.cameras, "Cameras JSON")->required()->check(CLI::ExistingFile);
  mine_cmd->add_option("--depth-format", mine.depth_format, "f32 or png16");
  mine_cmd->add_option("--overlap-min", mine.overlap_min, "Exclusive overlap threshold");
  mine_cmd->add_option("--stride", mine.stride, "Frame stride");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Two-stage contrastive training of per-pixel embeddings");
  add_common(train_cmd, train, true);
  train_cmd->add_option("--projections", train.projections, "Projections (GSP1)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--pairs", train.pairs, "Mined pairs JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--point-features", train.point_features, "Point features (float32)")->check(CLI::ExistingFile);

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Per-image coding rate, set cohesion and PCA images");
  add_common(metrics_cmd, metrics, false);
  metrics_cmd->add_option("--embeddings", metrics.embeddings, "Embeddings (float32)")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--projections", metrics.projections, "Projections (GSP1)")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--epsilon", metrics.epsilon, "Coding precision");

  PipelineArgs pipe;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage on a synthetic scene");
  add_common(pipe_cmd, pipe, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), {}, std::nullopt, kExitUsage);
  }

  std::string config_path;
  for (const auto* args : std::initializer_list<const CommonArgs*>{&gen, &seg, &proj, &mine, &train, &metrics, &pipe})
    if (!args->config.empty()) config_path = args->config;

  try {
    if (*gen_cmd) return run_gen_scene(gen);
    if (*seg_cmd) return run_segment(seg);
    if (*proj_cmd) return run_project(proj);
    if (*mine_cmd) return run_mine_pairs(mine);
    if (*train_cmd) return run_train(train);
    if (*metrics_cmd) return run_metrics(metrics);
    if (*pipe_cmd) return run_pipeline(pipe);
  } catch (const IoError& e) {
    return report_error("io", e.what(), e.path(), e.offset());
  } catch (const InvalidArgument& e) {
    return report_error("invalid_argument", e.what(), config_path);
  } catch (const nlohmann::json::exception& e) {
    return report_error("config", e.what(), config_path, json_byte_offset(e));
  } catch (const std::exception& e) {
    return report_error("runtime", e.what());
  }
  return kExitUsage;
}
