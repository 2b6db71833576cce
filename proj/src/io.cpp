#include "geoset/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "geoset/error.hpp"
#include "png16.hpp"

namespace geoset {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

IoError::IoError(std::string path, const std::string& message, std::optional<std::uint64_t> offset)
    : Error(path + ": " + message + (offset ? " (byte offset " + std::to_string(*offset) + ")" : std::string{})),
      path_(std::move(path)),
      offset_(offset) {}

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open file for writing");
  return out;
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

// Little-endian cursor over an in-memory file.
class BinaryCursor {
 public:
  BinaryCursor(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw IoError(path_, "unexpected end of file", pos_);
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void expect_magic(std::string_view magic) {
    if (data_.compare(0, magic.size(), magic) != 0) throw IoError(path_, "bad magic, expected " + std::string(magic), 0);
    pos_ = magic.size();
  }

  void expect_end() const {
    if (pos_ != data_.size()) throw IoError(path_, "trailing bytes after payload", pos_);
  }

  std::size_t position() const { return pos_; }
  [[noreturn]] void fail(const std::string& message, std::size_t at) const { throw IoError(path_, message, at); }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument(std::string(what) + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void write_labels(const fs::path& path, std::span<const std::uint32_t> labels) {
  auto out = open_out(path);
  out.write("GSL1", 4);
  put(out, static_cast<std::uint32_t>(labels.size()));
  for (auto label : labels) put(out, label);
  if (!out) throw IoError(path.string(), "write failed");
}

std::vector<std::uint32_t> read_labels(const fs::path& path) {
  BinaryCursor in(slurp(path), path.string());
  in.expect_magic("GSL1");
  const auto count = in.get<std::uint32_t>();
  std::vector<std::uint32_t> labels(count);
  for (auto& label : labels) label = in.get<std::uint32_t>();
  in.expect_end();
  return labels;
}

GeoSetPartition partition_from_labels(std::span<const std::uint32_t> labels) {
  GeoSetPartition partition;
  std::map<std::uint32_t, std::uint32_t> dense;
  partition.labels.reserve(labels.size());
  for (auto label : labels) {
    const auto [it, inserted] = dense.emplace(label, partition.set_count);
    if (inserted) ++partition.set_count;
    partition.labels.push_back(it->second);
  }
  return partition;
}

Json camera_to_json(const CameraView& view) {
  Json pose = Json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) pose.push_back(view.world_to_camera(r, c));
  return {{"view_id", view.view_id}, {"fx", view.fx},         {"fy", view.fy},
          {"cx", view.cx},           {"cy", view.cy},         {"width", view.width},
          {"height", view.height},   {"world_to_camera", pose}};
}

CameraView camera_from_json(const Json& j) {
  CameraView view;
  view.view_id = j.value("view_id", 0);
  view.fx = j.at("fx").get<double>();
  view.fy = j.at("fy").get<double>();
  view.cx = j.at("cx").get<double>();
  view.cy = j.at("cy").get<double>();
  view.width = j.at("width").get<int>();
  view.height = j.at("height").get<int>();
  const auto& pose = j.at("world_to_camera");
  if (!pose.is_array() || pose.size() != 16) throw InvalidArgument("world_to_camera must hold 16 numbers");
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) view.world_to_camera(r, c) = pose[r * 4 + c].get<double>();
  validate(view);
  return view;
}

DepthFormat depth_format_from_string(const std::string& name) {
  if (name == "f32" || name == "raw") return DepthFormat::RawFloat32;
  if (name == "png16" || name == "png") return DepthFormat::Png16;
  throw InvalidArgument("unknown depth format '" + name + "'");
}

void write_depth(const fs::path& path, const CameraView& view, DepthFormat format) {
  if (!view.has_depth()) throw InvalidArgument("view has no depth map");
  if (format == DepthFormat::Png16) {
    detail::Gray16 image{view.width, view.height, {}};
    image.pixels.reserve(view.depth.size());
    for (float d : view.depth)
      image.pixels.push_back(static_cast<std::uint16_t>(std::clamp(std::lround(d * 1000.0), 0L, 65535L)));
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_png16(path.string(), image);
    return;
  }
  auto out = open_out(path);
  out.write(reinterpret_cast<const char*>(view.depth.data()),
            static_cast<std::streamsize>(view.depth.size() * sizeof(float)));
  if (!out) throw IoError(path.string(), "write failed");
  write_json(fs::path(path.string() + ".json"), Json{{"width", view.width}, {"height", view.height}});
}

void read_depth(const fs::path& path, CameraView& view, DepthFormat format) {
  if (format == DepthFormat::Png16) {
    const auto image = detail::read_png16(path.string());
    if (image.width != view.width || image.height != view.height)
      throw IoError(path.string(), "depth image size does not match the camera");
    view.depth.resize(image.pixels.size());
    for (std::size_t i = 0; i < image.pixels.size(); ++i) view.depth[i] = static_cast<float>(image.pixels[i] / 1000.0);
    return;
  }
  const auto meta_path = fs::path(path.string() + ".json");
  const Json meta = read_json(meta_path);
  const int width = meta.at("width").get<int>();
  const int height = meta.at("height").get<int>();
  if (width != view.width || height != view.height)
    throw IoError(meta_path.string(), "depth size does not match the camera");
  const std::string bytes = slurp(path);
  const std::size_t expected = static_cast<std::size_t>(width) * height * sizeof(float);
  if (bytes.size() != expected)
    throw IoError(path.string(), "expected " + std::to_string(expected) + " bytes", std::min(bytes.size(), expected));
  view.depth.resize(static_cast<std::size_t>(width) * height);
  std::memcpy(view.depth.data(), bytes.data(), expected);
  for (std::size_t i = 0; i < view.depth.size(); ++i) {
    if (!(view.depth[i] >= 0.0f)) throw IoError(path.string(), "negative or non-finite depth", i * sizeof(float));
  }
}

void write_cameras(const fs::path& path, std::span<const CameraView> views, DepthFormat format) {
  Json list = Json::array();
  for (const auto& view : views) {
    Json entry = camera_to_json(view);
    if (view.has_depth()) {
      char name[48];
      std::snprintf(name, sizeof(name), "depth/view_%06d.%s", view.view_id,
                    format == DepthFormat::Png16 ? "png" : "f32");
      write_depth(path.parent_path() / name, view, format);
      entry["depth"] = name;
    }
    list.push_back(std::move(entry));
  }
  write_json(path, Json{{"views", list}});
}

std::vector<CameraView> read_cameras(const fs::path& path, DepthFormat format) {
  const Json root = read_json(path);
  Json list;
  if (root.is_array()) list = root;
  else if (root.is_object() && root.contains("views")) list = root.at("views");
  else list = Json::array({root});

  std::vector<CameraView> views;
  for (std::size_t i = 0; i < list.size(); ++i) {
    CameraView view;
    try {
      view = camera_from_json(list[i]);
      if (!list[i].contains("view_id")) view.view_id = static_cast<int>(i);
    } catch (const Json::exception& e) {
      throw IoError(path.string(), "camera " + std::to_string(i) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw IoError(path.string(), "camera " + std::to_string(i) + ": " + e.what());
    }
    if (list[i].contains("depth")) {
      const fs::path depth_path = path.parent_path() / list[i].at("depth").get<std::string>();
      const auto chosen = depth_path.extension() == ".png" ? DepthFormat::Png16 : format;
      read_depth(depth_path, view, chosen);
    }
    views.push_back(std::move(view));
  }
  return views;
}

void write_projections(const fs::path& path, const ProjectedGeoSets& projections) {
  auto out = open_out(path);
  out.write("GSP1", 4);
  put(out, static_cast<std::uint32_t>(projections.size()));
  for (const auto& [id, view] : projections) {
    put(out, static_cast<std::uint32_t>(id));
    put(out, static_cast<std::uint32_t>(view.width));
    put(out, static_cast<std::uint32_t>(view.height));
    put(out, static_cast<std::uint32_t>(view.pixel_count()));
    for (const auto& [set, pixels] : view.sets) {
      for (const auto& p : pixels) {
        put(out, set);
        put(out, static_cast<std::int32_t>(p.pixel.u));
        put(out, static_cast<std::int32_t>(p.pixel.v));
        put(out, p.point);
      }
    }
  }
  if (!out) throw IoError(path.string(), "write failed");
}

ProjectedGeoSets read_projections(const fs::path& path) {
  BinaryCursor in(slurp(path), path.string());
  in.expect_magic("GSP1");
  const auto views = in.get<std::uint32_t>();
  ProjectedGeoSets out;
  for (std::uint32_t i = 0; i < views; ++i) {
    const std::size_t header = in.position();
    ViewProjection view;
    view.view_id = static_cast<int>(in.get<std::uint32_t>());
    view.width = static_cast<int>(in.get<std::uint32_t>());
    view.height = static_cast<int>(in.get<std::uint32_t>());
    const auto entries = in.get<std::uint32_t>();
    for (std::uint32_t e = 0; e < entries; ++e) {
      const std::size_t at = in.position();
      const auto set = in.get<std::uint32_t>();
      const Pixel px{in.get<std::int32_t>(), in.get<std::int32_t>()};
      const auto point = in.get<std::uint32_t>();
      if (px.u < 0 || px.v < 0 || px.u >= view.width || px.v >= view.height) in.fail("pixel out of bounds", at);
      view.sets[set].push_back({px, point});
    }
    if (!out.emplace(view.view_id, std::move(view)).second) in.fail("duplicate view id", header);
  }
  in.expect_end();
  return out;
}

Json pairs_to_json(std::span<const ViewPair> pairs) {
  Json list = Json::array();
  for (const auto& p : pairs) list.push_back({{"m", p.view_m}, {"n", p.view_n}, {"overlap", p.overlap}});
  return Json{{"pairs", list}};
}

std::vector<ViewPair> pairs_from_json(const Json& j) {
  std::vector<ViewPair> pairs;
  for (const auto& p : j.at("pairs")) pairs.push_back({p.at("m").get<int>(), p.at("n").get<int>(), p.at("overlap").get<double>()});
  return pairs;
}

void write_embeddings(const fs::path& path, const EmbeddingTable& table) {
  auto out = open_out(path);
  Json views = Json::array();
  std::size_t offset = 0;
  for (const auto& [id, map] : table.views) {
    views.push_back({{"id", id}, {"height", map.height()}, {"width", map.width()}, {"channels", map.channels()}, {"offset", offset}});
    for (double x : map.data()) put(out, static_cast<float>(x));
    offset += map.data().size();
  }
  if (!out) throw IoError(path.string(), "write failed");
  write_json(fs::path(path.string() + ".json"), Json{{"views", views}});
}

EmbeddingTable read_embeddings(const fs::path& path) {
  const Json meta = read_json(fs::path(path.string() + ".json"));
  const std::string bytes = slurp(path);
  EmbeddingTable table;
  for (const auto& v : meta.at("views")) {
    FeatureMap map(v.at("height").get<int>(), v.at("width").get<int>(), v.at("channels").get<int>());
    const std::size_t begin = v.at("offset").get<std::size_t>() * sizeof(float);
    const std::size_t count = map.data().size();
    if (begin + count * sizeof(float) > bytes.size()) throw IoError(path.string(), "embedding data truncated", bytes.size());
    auto data = map.data();
    for (std::size_t i = 0; i < count; ++i) {
      float x;
      std::memcpy(&x, bytes.data() + begin + i * sizeof(float), sizeof(float));
      data[i] = x;
    }
    table.views.emplace(v.at("id").get<int>(), std::move(map));
  }
  return table;
}

PointFeatures read_point_features(const fs::path& path) {
  const Json meta = read_json(fs::path(path.string() + ".json"));
  const auto count = meta.at("count").get<Eigen::Index>();
  const auto channels = meta.at("channels").get<Eigen::Index>();
  const std::string bytes = slurp(path);
  const auto expected = static_cast<std::size_t>(count * channels) * sizeof(float);
  if (bytes.size() != expected) throw IoError(path.string(), "expected " + std::to_string(expected) + " bytes", std::min(bytes.size(), expected));
  PointFeatures features(count, channels);
  for (Eigen::Index i = 0; i < count * channels; ++i) {
    float x;
    std::memcpy(&x, bytes.data() + i * sizeof(float), sizeof(float));
    features.data()[i] = x;
  }
  // Float storage loses the unit norm in the last bits.
  for (Eigen::Index r = 0; r < count; ++r) {
    const double n = features.row(r).norm();
    if (n > 0.0) features.row(r) /= n;
  }
  return features;
}

void write_point_features(const fs::path& path, const PointFeatures& features) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < features.size(); ++i) put(out, static_cast<float>(features.data()[i]));
  if (!out) throw IoError(path.string(), "write failed");
  write_json(fs::path(path.string() + ".json"), Json{{"count", features.rows()}, {"channels", features.cols()}});
}

namespace {

const char* aggregator_name(const Aggregator& agg) {
  return agg.kind == Aggregator::Kind::Mean ? "mean" : "arbitrary_point";
}

Aggregator aggregator_from(const std::string& name, std::uint64_t seed) {
  if (name == "mean") return Aggregator::mean();
  if (name == "arbitrary_point") return Aggregator::arbitrary_point(seed);
  throw InvalidArgument("unknown aggregator '" + name + "'");
}

}  // namespace

Json train_config_to_json(const TrainConfig& c) {
  return {{"base_lr", c.base_lr},
          {"batch_size", c.batch_size},
          {"epochs_stage1", c.epochs_stage1},
          {"epochs_stage2", c.epochs_stage2},
          {"poly_power", c.poly_power},
          {"tau", c.tau},
          {"seed", c.seed},
          {"aggregator",
           {{"anchor", aggregator_name(c.agg_anchor)},
            {"positive", aggregator_name(c.agg_positive)},
            {"seed", c.agg_anchor.seed}}},
          {"channels", c.channels},
          {"init_scale", c.init_scale},
          {"momentum", c.momentum},
          {"batch_negatives", c.batch_negatives},
          {"reset_scale_between_stages", c.reset_scale_between_stages}};
}

TrainConfig train_config_from_json(const Json& j) {
  if (!j.contains("seed")) throw InvalidArgument("train config requires a 'seed' field");
  TrainConfig c;
  c.base_lr = j.value("base_lr", c.base_lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs_stage1 = j.value("epochs_stage1", c.epochs_stage1);
  c.epochs_stage2 = j.value("epochs_stage2", c.epochs_stage2);
  c.poly_power = j.value("poly_power", c.poly_power);
  c.tau = j.value("tau", c.tau);
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("aggregator")) {
    const auto& a = j.at("aggregator");
    const auto seed = a.value("seed", c.seed);
    c.agg_anchor = aggregator_from(a.value("anchor", "mean"), seed);
    c.agg_positive = aggregator_from(a.value("positive", "mean"), seed);
  }
  c.channels = j.value("channels", c.channels);
  c.init_scale = j.value("init_scale", c.init_scale);
  c.momentum = j.value("momentum", c.momentum);
  c.batch_negatives = j.value("batch_negatives", c.batch_negatives);
  c.reset_scale_between_stages = j.value("reset_scale_between_stages", c.reset_scale_between_stages);
  validate(c);
  return c;
}

Json log_record_to_json(const LogRecord& r) {
  Json j{{"stage", r.stage}, {"epoch", r.epoch}, {"step", r.step}, {"loss_kind", r.kind}};
  if (r.kind == "epoch") {
    j["intra_set_cosine"] = r.intra_set_cosine;
    j["cross_set_cosine"] = r.cross_set_cosine;
  } else {
    j["loss"] = r.loss;
    j["lr"] = r.lr;
  }
  return j;
}

void write_log(const fs::path& path, std::span<const LogRecord> log) {
  auto out = open_out(path);
  for (const auto& r : log) out << log_record_to_json(r).dump() << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

Json scene_spec_to_json(const SyntheticSceneSpec& spec) {
  Json primitives = Json::array();
  for (const auto& primitive : spec.primitives) {
    if (const auto* plane = std::get_if<PlanePrimitive>(&primitive)) {
      primitives.push_back({{"type", "plane"}, {"origin", vec3_json(plane->origin)}, {"axis_u", vec3_json(plane->axis_u)},
                            {"axis_v", vec3_json(plane->axis_v)}, {"density", plane->density}});
    } else {
      const auto& box = std::get<BoxPrimitive>(primitive);
      primitives.push_back({{"type", "box"}, {"center", vec3_json(box.center)}, {"size", vec3_json(box.size)},
                            {"yaw", box.yaw}, {"density", box.density}});
    }
  }
  return {{"primitives", primitives}, {"noise_sigma", spec.noise_sigma}, {"seed", spec.seed}};
}

SyntheticSceneSpec scene_spec_from_json(const Json& j) {
  SyntheticSceneSpec spec;
  spec.noise_sigma = j.value("noise_sigma", 0.0);
  spec.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("primitives")) {
    const auto type = p.at("type").get<std::string>();
    if (type == "plane") {
      PlanePrimitive plane;
      plane.origin = vec3_from(p.at("origin"), "origin");
      plane.axis_u = vec3_from(p.at("axis_u"), "axis_u");
      plane.axis_v = vec3_from(p.at("axis_v"), "axis_v");
      plane.density = p.value("density", plane.density);
      spec.primitives.emplace_back(plane);
    } else if (type == "box") {
      BoxPrimitive box;
      box.center = vec3_from(p.at("center"), "center");
      box.size = vec3_from(p.at("size"), "size");
      box.yaw = p.value("yaw", 0.0);
      box.density = p.value("density", box.density);
      spec.primitives.emplace_back(box);
    } else {
      throw InvalidArgument("unknown primitive type '" + type + "'");
    }
  }
  return spec;
}

Json segmentation_params_to_json(const SegmentationParams& p) {
  return {{"k_threshold", p.k_threshold}, {"min_size", p.min_size}, {"convexity_relaxation", p.convexity_relaxation}};
}

SegmentationParams segmentation_params_from_json(const Json& j) {
  SegmentationParams p;
  p.k_threshold = j.value("k_threshold", p.k_threshold);
  p.min_size = j.value("min_size", p.min_size);
  p.convexity_relaxation = j.value("convexity_relaxation", p.convexity_relaxation);
  return p;
}

void write_ppm(const fs::path& path, int height, int width, std::span<const double> rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) throw InvalidArgument("PPM buffer size mismatch");
  auto out = open_out(path);
  out << "P6\n" << width << ' ' << height << "\n255\n";
  for (double x : rgb) out.put(static_cast<char>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)));
  if (!out) throw IoError(path.string(), "write failed");
}

Json read_json(const fs::path& path) {
  const std::string text = slurp(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw IoError(path.string(), std::string("malformed JSON: ") + e.what(), e.byte);
  }
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace geoset
