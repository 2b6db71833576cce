#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoset/camera.hpp"
#include "geoset/contrast.hpp"
#include "geoset/projection.hpp"
#include "geoset/segmentation.hpp"
#include "geoset/synthetic.hpp"
#include "geoset/trainer.hpp"
#include "geoset/types.hpp"

// File formats shared by the CLI and the Python module. Bulk arrays are raw
// little-endian binary; metadata is JSON.

namespace geoset {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// "GSL1" label sidecar: magic, u32 count, count x u32 label.
void write_labels(const fs::path& path, std::span<const std::uint32_t> labels);
std::vector<std::uint32_t> read_labels(const fs::path& path);

/// Partition from a label file; relabels densely by first appearance.
GeoSetPartition partition_from_labels(std::span<const std::uint32_t> labels);

// Camera JSON: {fx, fy, cx, cy, width, height, world_to_camera: [16, row-major]}
// plus optional "view_id" and "depth" (path relative to the cameras file).
Json camera_to_json(const CameraView& view);
CameraView camera_from_json(const Json& j);

enum class DepthFormat { RawFloat32, Png16 };

// Raw float32 depth in meters with a {width, height} JSON sidecar at
// "<path>.json", or a 16-bit grayscale PNG in millimeters.
void write_depth(const fs::path& path, const CameraView& view, DepthFormat format);
void read_depth(const fs::path& path, CameraView& view, DepthFormat format);
DepthFormat depth_format_from_string(const std::string& name);

/// Writes {"views": [...]} with depth maps next to the JSON file under
/// `depth/`.
void write_cameras(const fs::path& path, std::span<const CameraView> views,
                   DepthFormat format = DepthFormat::RawFloat32);
/// Reads a cameras file (a {"views": [...]} object, a bare array, or a
/// single camera object) and loads any referenced depth maps.
std::vector<CameraView> read_cameras(const fs::path& path,
                                     DepthFormat format = DepthFormat::RawFloat32);

// "GSP1" projections: magic, u32 view count, then per view u32 id, u32
// width, u32 height, u32 entry count and entries of (u32 set, i32 u, i32 v,
// u32 point) sorted by (set, v, u).
void write_projections(const fs::path& path, const ProjectedGeoSets& projections);
ProjectedGeoSets read_projections(const fs::path& path);

Json pairs_to_json(std::span<const ViewPair> pairs);
std::vector<ViewPair> pairs_from_json(const Json& j);

// Embeddings: all views concatenated as float32 (view order ascending),
// sidecar JSON {"views": [{"id", "height", "width", "channels", "offset"}]}
// at "<path>.json"; offset counts floats.
void write_embeddings(const fs::path& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const fs::path& path);

/// Point features as float32 rows with a {"count", "channels"} sidecar.
PointFeatures read_point_features(const fs::path& path);
void write_point_features(const fs::path& path, const PointFeatures& features);

Json train_config_to_json(const TrainConfig& config);
/// Missing fields keep their defaults; "seed" is mandatory.
TrainConfig train_config_from_json(const Json& j);

Json log_record_to_json(const LogRecord& record);
/// One JSON object per line.
void write_log(const fs::path& path, std::span<const LogRecord> log);

Json scene_spec_to_json(const SyntheticSceneSpec& spec);
SyntheticSceneSpec scene_spec_from_json(const Json& j);

Json segmentation_params_to_json(const SegmentationParams& params);
SegmentationParams segmentation_params_from_json(const Json& j);

/// Binary PPM (P6) of an H x W x 3 map in [0, 1].
void write_ppm(const fs::path& path, int height, int width, std::span<const double> rgb);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& j);

}  // namespace geoset
