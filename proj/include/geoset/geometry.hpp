#pragma once

#include <Eigen/Core>
#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace geoset {

using Vec3 = Eigen::Vector3d;

/// Undirected adjacency edge, stored with a < b.
struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;

  auto operator<=>(const Edge&) const = default;
};

/// 3D scene points with optional unit normals and an undirected adjacency
/// list. An empty `normals` vector means normals have not been estimated.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<Edge> edges;

  std::size_t size() const noexcept { return positions.size(); }
  bool has_normals() const noexcept { return !positions.empty() && normals.size() == positions.size(); }

  bool operator==(const PointCloud&) const = default;
};

/// Checks the PointCloud invariants (unit normals, in-range canonical edges,
/// no duplicates or self-loops). Throws InvalidArgument on the first violation.
void validate(const PointCloud& cloud);

/// Sorts and deduplicates an edge list after swapping each pair into a < b.
/// Self-loops are dropped.
std::vector<Edge> canonicalize_edges(std::vector<Edge> edges);

struct NormalEstimate {
  PointCloud cloud;
  /// Indices of points whose neighborhood covariance had rank < 2. Their
  /// normal is set to +z.
  std::vector<std::uint32_t> degenerate;
};

/// PCA normals from each point and its k nearest neighbors. Normals are
/// oriented so that dot(n, viewpoint - p) >= 0.
NormalEstimate estimate_normals(const PointCloud& cloud, int k,
                                const Vec3& viewpoint = Vec3::Zero());

/// Indices of the k nearest neighbors of every point (self excluded), ordered
/// by (squared distance, index).
std::vector<std::vector<std::uint32_t>> k_nearest(std::span<const Vec3> positions, int k);

/// Symmetric k-NN adjacency: deduplicated and sorted lexicographically.
std::vector<Edge> build_knn_graph(const PointCloud& cloud, int k);

}  // namespace geoset
