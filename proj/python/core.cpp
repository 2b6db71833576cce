#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "geoset/camera.hpp"
#include "geoset/contrast.hpp"
#include "geoset/error.hpp"
#include "geoset/geometry.hpp"
#include "geoset/io.hpp"
#include "geoset/metrics.hpp"
#include "geoset/pipeline.hpp"
#include "geoset/ply.hpp"
#include "geoset/projection.hpp"
#include "geoset/segmentation.hpp"
#include "geoset/synthetic.hpp"
#include "geoset/trainer.hpp"

namespace py = pybind11;
using namespace geoset;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I64Array = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

Json parse(const std::string& text) { return Json::parse(text); }

std::vector<Vec3> rows3(const F64Array& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw InvalidArgument(std::string(what) + " must have shape (N, 3)");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  const auto v = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = Vec3(v(i, 0), v(i, 1), v(i, 2));
  return out;
}

F64Array from_rows3(const std::vector<Vec3>& rows) {
  F64Array out({static_cast<py::ssize_t>(rows.size()), py::ssize_t{3}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < 3; ++c) v(i, c) = rows[i][c];
  return out;
}

py::array_t<std::uint32_t> from_u32(const std::vector<std::uint32_t>& values) {
  py::array_t<std::uint32_t> out(static_cast<py::ssize_t>(values.size()));
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

std::vector<Edge> edges_from(const I64Array& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || a.shape(1) != 2) throw InvalidArgument("edges must have shape (E, 2)");
  std::vector<Edge> out;
  const auto v = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    if (v(i, 0) < 0 || v(i, 1) < 0) throw InvalidArgument("edge indices must be non-negative");
    out.push_back({static_cast<std::uint32_t>(v(i, 0)), static_cast<std::uint32_t>(v(i, 1))});
  }
  return canonicalize_edges(std::move(out));
}

py::array_t<std::int64_t> from_edges(const std::vector<Edge>& edges) {
  py::array_t<std::int64_t> out({static_cast<py::ssize_t>(edges.size()), py::ssize_t{2}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    v(i, 0) = edges[i].a;
    v(i, 1) = edges[i].b;
  }
  return out;
}

PointCloud cloud_from(const F64Array& positions, const std::optional<F64Array>& normals, const I64Array& edges) {
  PointCloud cloud;
  cloud.positions = rows3(positions, "positions");
  if (normals) cloud.normals = rows3(*normals, "normals");
  cloud.edges = edges_from(edges);
  return cloud;
}

FeatureMap map_from(const F64Array& a, bool normalized) {
  if (a.ndim() != 3) throw InvalidArgument("feature maps must have shape (H, W, C)");
  FeatureMap f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), f.data().begin());
  f.set_normalized(normalized);
  return f;
}

F64Array to_array(const FeatureMap& f) {
  F64Array out({py::ssize_t{f.height()}, py::ssize_t{f.width()}, py::ssize_t{f.channels()}});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

CameraView camera_from(const py::dict& d) {
  CameraView view = camera_from_json(parse(py::str(py::module_::import("json").attr("dumps")(d["camera"]))));
  if (d.contains("depth")) {
    const auto depth = py::array_t<float, py::array::c_style | py::array::forcecast>(d["depth"]);
    if (depth.ndim() != 2 || depth.shape(0) != view.height || depth.shape(1) != view.width)
      throw InvalidArgument("depth must have shape (height, width)");
    view.depth.assign(depth.data(), depth.data() + depth.size());
  }
  validate(view);
  return view;
}

py::dict camera_to_dict(const CameraView& view) {
  py::dict d;
  d["camera"] = py::module_::import("json").attr("loads")(camera_to_json(view).dump());
  py::array_t<float> depth({py::ssize_t{view.height}, py::ssize_t{view.width}});
  std::copy(view.depth.begin(), view.depth.end(), depth.mutable_data());
  d["depth"] = depth;
  return d;
}

py::dict projection_to_dict(const ViewProjection& p) {
  py::dict sets;
  for (const auto& [set, pixels] : p.sets) {
    py::array_t<std::int64_t> rows({static_cast<py::ssize_t>(pixels.size()), py::ssize_t{3}});
    auto v = rows.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      v(i, 0) = pixels[i].pixel.u;
      v(i, 1) = pixels[i].pixel.v;
      v(i, 2) = pixels[i].point;
    }
    sets[py::int_(set)] = rows;
  }
  py::dict d;
  d["view_id"] = p.view_id;
  d["width"] = p.width;
  d["height"] = p.height;
  d["sets"] = sets;
  return d;
}

ViewProjection projection_from(const py::dict& d) {
  ViewProjection p{d["view_id"].cast<int>(), d["width"].cast<int>(), d["height"].cast<int>(), {}};
  for (const auto& [key, value] : d["sets"].cast<py::dict>()) {
    const auto rows = I64Array::ensure(value);
    if (!rows || rows.ndim() != 2 || rows.shape(1) != 3) throw InvalidArgument("set pixels must have shape (N, 3)");
    auto& list = p.sets[key.cast<std::uint32_t>()];
    const auto v = rows.unchecked<2>();
    for (py::ssize_t i = 0; i < rows.shape(0); ++i)
      list.push_back({{static_cast<int>(v(i, 0)), static_cast<int>(v(i, 1))}, static_cast<std::uint32_t>(v(i, 2))});
  }
  return p;
}

std::vector<PixelPair> matches_from(const I64Array& a) {
  if (a.ndim() != 2 || (a.shape(1) != 4 && a.shape(1) != 5))
    throw InvalidArgument("matches must have shape (N, 4) or (N, 5): u_m, v_m, u_n, v_n[, point]");
  std::vector<PixelPair> out;
  const auto v = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    out.push_back({{static_cast<int>(v(i, 0)), static_cast<int>(v(i, 1))},
                   {static_cast<int>(v(i, 2)), static_cast<int>(v(i, 3))},
                   a.shape(1) == 5 ? static_cast<std::uint32_t>(v(i, 4)) : static_cast<std::uint32_t>(i)});
  return out;
}

py::dict summarize(const TrainResult& result, const ProjectedGeoSets& projections, double epsilon) {
  py::list log;
  for (const auto& r : result.log) log.append(py::module_::import("json").attr("loads")(log_record_to_json(r).dump()));
  py::dict embeddings;
  for (const auto& [view, f] : result.table.views) embeddings[py::int_(view)] = to_array(f);
  const auto [intra, cross] = evaluate_cohesion(result.table, projections);
  double rate = 0.0;
  for (const auto& [view, p] : projections)
    rate += per_image_coding_rate(normalize(result.table.views.at(view)), set_label_map(p), epsilon);
  py::dict d;
  d["embeddings"] = embeddings;
  d["log"] = log;
  d["intra_set_cosine"] = intra;
  d["cross_set_cosine"] = cross;
  d["mean_coding_rate"] = rate / static_cast<double>(projections.size());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Geometric-set contrastive pre-training core";

  py::register_exception<Error>(m, "GeosetError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      py::object error = py::module_::import("geoset._core").attr("GeosetIoError")(e.what());
      error.attr("path") = e.path();
      error.attr("offset") = e.offset() ? py::cast(*e.offset()) : py::none();
      PyErr_SetObject(error.get_type().ptr(), error.ptr());
    }
  });
  m.attr("GeosetIoError") = py::module_::import("builtins").attr("type")(
      "GeosetIoError", py::make_tuple(m.attr("GeosetError")), py::dict());

  m.def(
      "generate_scene",
      [](const std::string& spec_json) {
        const auto scene = generate_scene(scene_spec_from_json(parse(spec_json)));
        return py::make_tuple(from_rows3(scene.cloud.positions), from_rows3(scene.cloud.normals),
                              from_u32(scene.labels));
      },
      py::arg("spec_json"), "Sample a synthetic scene. Returns (positions, normals, face_labels).");

  m.def(
      "read_ply",
      [](const std::string& path) {
        const auto cloud = read_ply(path);
        return py::make_tuple(from_rows3(cloud.positions),
                              cloud.has_normals() ? py::object(from_rows3(cloud.normals)) : py::none(),
                              from_edges(cloud.edges));
      },
      py::arg("path"), "Reads a PLY point cloud. Returns (positions, normals or None, edges).");

  m.def(
      "read_labels", [](const std::string& path) { return from_u32(read_labels(path)); }, py::arg("path"));

  m.def(
      "knn_graph",
      [](const F64Array& positions, int k) {
        PointCloud cloud;
        cloud.positions = rows3(positions, "positions");
        return from_edges(build_knn_graph(cloud, k));
      },
      py::arg("positions"), py::arg("k") = 8);

  m.def(
      "estimate_normals",
      [](const F64Array& positions, int k, std::array<double, 3> viewpoint) {
        PointCloud cloud;
        cloud.positions = rows3(positions, "positions");
        const auto estimate = estimate_normals(cloud, k, Vec3(viewpoint[0], viewpoint[1], viewpoint[2]));
        return py::make_tuple(from_rows3(estimate.cloud.normals), from_u32(estimate.degenerate));
      },
      py::arg("positions"), py::arg("k") = 8, py::arg("viewpoint") = std::array<double, 3>{0, 0, 0},
      "PCA normals. Returns (normals, degenerate_indices).");

  m.def(
      "segment",
      [](const F64Array& positions, const F64Array& normals, const I64Array& edges, double k_threshold,
         std::uint32_t min_size, bool convexity_relaxation) {
        const auto cloud = cloud_from(positions, normals, edges);
        const auto partition = segment(cloud, {k_threshold, min_size, convexity_relaxation});
        return from_u32(partition.labels);
      },
      py::arg("positions"), py::arg("normals"), py::arg("edges"), py::arg("k_threshold") = 0.05,
      py::arg("min_size") = 20, py::arg("convexity_relaxation") = false);

  m.def(
      "look_at",
      [](std::array<double, 3> eye, std::array<double, 3> target, std::array<double, 3> up) {
        const Eigen::Matrix4d pose = look_at(Vec3(eye[0], eye[1], eye[2]), Vec3(target[0], target[1], target[2]),
                                             Vec3(up[0], up[1], up[2]));
        F64Array out({py::ssize_t{4}, py::ssize_t{4}});
        auto v = out.mutable_unchecked<2>();
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) v(r, c) = pose(r, c);
        return out;
      },
      py::arg("eye"), py::arg("target"), py::arg("up") = std::array<double, 3>{0, 0, 1});

  m.def(
      "render_views",
      [](const std::string& config_json) {
        const auto config = pipeline_config_from_json(parse(config_json));
        py::list out;
        for (const auto& v : render_views(config.scene, config.rig))
          out.append(camera_to_dict(v));
        return out;
      },
      py::arg("config_json"), "Cameras of a pipeline config rendered against its scene; each is {camera, depth}.");

  m.def(
      "project_point",
      [](std::array<double, 3> p, const py::dict& view) -> std::optional<py::tuple> {
        const auto hit = project_point(Vec3(p[0], p[1], p[2]), camera_from(view));
        if (!hit) return std::nullopt;
        return py::make_tuple(hit->u, hit->v, hit->z);
      },
      py::arg("point"), py::arg("view"));

  m.def(
      "project_geo_sets",
      [](const F64Array& positions, const py::array_t<std::uint32_t>& labels, const py::dict& view,
         double threshold) {
        PointCloud cloud;
        cloud.positions = rows3(positions, "positions");
        const auto partition = partition_from_labels({labels.data(), static_cast<std::size_t>(labels.size())});
        return projection_to_dict(project_geo_sets(cloud, partition, camera_from(view), threshold));
      },
      py::arg("positions"), py::arg("labels"), py::arg("view"), py::arg("threshold") = kDefaultDepthThreshold,
      "Set projections {view_id, width, height, sets: {set: (N, 3) array of u, v, point}}.");

  m.def(
      "compute_overlap",
      [](const py::dict& a, const py::dict& b, double threshold) {
        return compute_overlap(camera_from(a), camera_from(b), threshold);
      },
      py::arg("view_m"), py::arg("view_n"), py::arg("threshold") = kDefaultDepthThreshold);

  m.def(
      "mine_pairs",
      [](const py::list& views, int frame_stride, double overlap_min, double threshold) {
        std::vector<CameraView> cameras;
        for (const auto& v : views) cameras.push_back(camera_from(v.cast<py::dict>()));
        std::vector<py::tuple> out;
        for (const auto& p : mine_pairs(cameras, {frame_stride, overlap_min, threshold}))
          out.push_back(py::make_tuple(p.view_m, p.view_n, p.overlap));
        return out;
      },
      py::arg("views"), py::arg("frame_stride") = 25, py::arg("overlap_min") = 0.3,
      py::arg("threshold") = kDefaultDepthThreshold, "Returns [(view_m, view_n, overlap)].");

  m.def(
      "build_match_index",
      [](const py::dict& m_proj, const py::dict& n_proj, std::uint32_t min_pixels, std::size_t pixel_cap,
         std::uint64_t seed) {
        const auto index = build_match_index(projection_from(m_proj), projection_from(n_proj),
                                             {min_pixels, pixel_cap, seed});
        py::array_t<std::int64_t> pairs({static_cast<py::ssize_t>(index.pixel_pairs.size()), py::ssize_t{5}});
        auto v = pairs.mutable_unchecked<2>();
        for (std::size_t i = 0; i < index.pixel_pairs.size(); ++i) {
          const auto& p = index.pixel_pairs[i];
          v(i, 0) = p.m.u;
          v(i, 1) = p.m.v;
          v(i, 2) = p.n.u;
          v(i, 3) = p.n.v;
          v(i, 4) = p.point;
        }
        std::vector<std::uint32_t> sets;
        for (const auto& t : index.set_tuples) sets.push_back(t.set);
        return py::make_tuple(pairs, from_u32(sets));
      },
      py::arg("proj_m"), py::arg("proj_n"), py::arg("min_pixels") = 5, py::arg("pixel_cap") = 4096,
      py::arg("seed") = 0, "Returns (pixel_pairs (N, 5): u_m, v_m, u_n, v_n, point; matched set ids).");

  m.def(
      "normalize",
      [](const F64Array& raw) { return to_array(normalize(map_from(raw, false))); }, py::arg("raw"));

  m.def(
      "pixel_infonce",
      [](const F64Array& f_m, const F64Array& f_n, const I64Array& matches, double tau) {
        const auto out = pixel_infonce(map_from(f_m, true), map_from(f_n, true), matches_from(matches),
                                       Temperature(tau));
        return py::make_tuple(out.loss, to_array(out.grads.at(kAnchorSide)), to_array(out.grads.at(kPositiveSide)));
      },
      py::arg("f_m"), py::arg("f_n"), py::arg("matches"), py::arg("tau") = Temperature::kDefault,
      "InfoNCE over pixel matches of normalized maps. Returns (loss, grad_m, grad_n).");

  m.def(
      "set_infonce",
      [](const F64Array& f_m, const F64Array& f_n, const py::dict& proj_m, const py::dict& proj_n,
         const std::vector<std::uint32_t>& sets, double tau, bool arbitrary_anchor, std::uint64_t seed) {
        auto pm = projection_from(proj_m), pn = projection_from(proj_n);
        if (pm.view_id == pn.view_id) throw InvalidArgument("the two projections need distinct view ids");
        const std::map<int, FeatureMap> features = {{pm.view_id, map_from(f_m, true)}, {pn.view_id, map_from(f_n, true)}};
        std::vector<SetTuple> tuples;
        for (auto s : sets) tuples.push_back({s, pm.view_id, pn.view_id});
        const ProjectedGeoSets projections = {{pm.view_id, pm}, {pn.view_id, pn}};
        const auto anchor = arbitrary_anchor ? Aggregator::arbitrary_point(seed) : Aggregator::mean();
        const auto out = set_infonce(features, projections, tuples, Temperature(tau), anchor, Aggregator::mean());
        return py::make_tuple(out.loss, to_array(out.grads.at(pm.view_id)), to_array(out.grads.at(pn.view_id)));
      },
      py::arg("f_m"), py::arg("f_n"), py::arg("proj_m"), py::arg("proj_n"), py::arg("sets"),
      py::arg("tau") = Temperature::kDefault, py::arg("arbitrary_anchor") = false, py::arg("seed") = 0,
      "Set-level InfoNCE between two views. Returns (loss, grad_m, grad_n).");

  m.def(
      "coding_rate",
      [](const F64Array& features, double epsilon) {
        if (features.ndim() != 2) throw InvalidArgument("features must have shape (d, m)");
        Eigen::MatrixXd f(features.shape(0), features.shape(1));
        const auto v = features.unchecked<2>();
        for (py::ssize_t r = 0; r < features.shape(0); ++r)
          for (py::ssize_t c = 0; c < features.shape(1); ++c) f(r, c) = v(r, c);
        return coding_rate(f, epsilon);
      },
      py::arg("features"), py::arg("epsilon") = kDefaultCodingEpsilon);

  m.def("poly_lr", &poly_lr, py::arg("base"), py::arg("iter"), py::arg("max_iter"), py::arg("power") = 0.9);

  m.def(
      "train_pipeline",
      [](const std::string& config_json) {
        const auto config = pipeline_config_from_json(parse(config_json));
        const auto prepared = prepare_scene(config);
        TrainDataset dataset{prepared.prepared.projections, prepared.prepared.matches, std::nullopt};
        const auto result = run_two_stage(dataset, config.train);
        py::dict d = summarize(result, dataset.projections, config.epsilon);
        d["labels"] = from_u32(prepared.partition.labels);
        d["set_count"] = prepared.partition.set_count;
        d["pair_count"] = prepared.prepared.pairs.size();
        return d;
      },
      py::arg("config_json"),
      "Scene synthesis, segmentation, projection, mining and two-stage training for a pipeline config.");
}
