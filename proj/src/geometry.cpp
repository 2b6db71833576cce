#include "geoset/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "geoset/error.hpp"
#include "kdtree.hpp"

namespace geoset {

void validate(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (!cloud.normals.empty()) {
    if (cloud.normals.size() != n) throw InvalidArgument("normals count differs from positions");
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(cloud.normals[i].norm() - 1.0) > 1e-6)
        throw InvalidArgument("normal " + std::to_string(i) + " is not unit length");
    }
  }
  for (std::size_t e = 0; e < cloud.edges.size(); ++e) {
    const Edge& edge = cloud.edges[e];
    if (edge.a >= n || edge.b >= n) throw InvalidArgument("edge " + std::to_string(e) + " out of range");
    if (edge.a == edge.b) throw InvalidArgument("edge " + std::to_string(e) + " is a self-loop");
    if (edge.a > edge.b) throw InvalidArgument("edge " + std::to_string(e) + " is not stored with a < b");
  }
  auto sorted = cloud.edges;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidArgument("duplicate edge");
}

std::vector<Edge> canonicalize_edges(std::vector<Edge> edges) {
  for (auto& e : edges) {
    if (e.a > e.b) std::swap(e.a, e.b);
  }
  std::erase_if(edges, [](const Edge& e) { return e.a == e.b; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<std::uint32_t>> k_nearest(std::span<const Vec3> positions, int k) {
  if (k < 1) throw InvalidArgument("k must be at least 1");
  if (static_cast<std::size_t>(k) >= positions.size())
    throw InvalidArgument("k must be smaller than the point count");
  detail::KdTree tree(positions);
  std::vector<std::vector<std::uint32_t>> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out[i] = tree.nearest(positions[i], static_cast<std::size_t>(k), static_cast<long>(i));
  }
  return out;
}

NormalEstimate estimate_normals(const PointCloud& cloud, int k, const Vec3& viewpoint) {
  if (k < 3) throw InvalidArgument("normal estimation needs k >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1)
    throw InvalidArgument("normal estimation needs at least k + 1 points");

  NormalEstimate result;
  result.cloud = cloud;
  result.cloud.normals.assign(cloud.size(), Vec3::UnitZ());
  const auto neighbors = k_nearest(cloud.positions, k);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3 mean = cloud.positions[i];
    for (auto j : neighbors[i]) mean += cloud.positions[j];
    mean /= static_cast<double>(neighbors[i].size() + 1);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    auto accumulate = [&](const Vec3& p) {
      const Vec3 d = p - mean;
      cov += d * d.transpose();
    };
    accumulate(cloud.positions[i]);
    for (auto j : neighbors[i]) accumulate(cloud.positions[j]);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Vec3 eig = solver.eigenvalues();  // ascending
    const double largest = eig[2];
    if (!(largest > 1e-24) || eig[1] <= 1e-10 * largest) {
      result.degenerate.push_back(static_cast<std::uint32_t>(i));
      continue;
    }
    Vec3 normal = solver.eigenvectors().col(0).normalized();
    if (normal.dot(viewpoint - cloud.positions[i]) < 0.0) normal = -normal;
    result.cloud.normals[i] = normal;
  }
  return result;
}

std::vector<Edge> build_knn_graph(const PointCloud& cloud, int k) {
  const auto neighbors = k_nearest(cloud.positions, k);
  std::vector<Edge> edges;
  edges.reserve(cloud.size() * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (auto j : neighbors[i]) edges.push_back({static_cast<std::uint32_t>(i), j});
  }
  return canonicalize_edges(std::move(edges));
}

}  // namespace geoset
