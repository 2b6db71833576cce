#include "geoset/segmentation.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "geoset/error.hpp"

namespace geoset {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Joins two roots; `weight` becomes the merged component's internal
  // difference (edges arrive in ascending order).
  void join(std::uint32_t a, std::uint32_t b, double weight) {
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    internal_[a] = std::max({internal_[a], internal_[b], weight});
  }

  std::uint32_t size(std::uint32_t root) const { return size_[root]; }
  double internal(std::uint32_t root) const { return internal_[root]; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
  std::vector<double> internal_;
};

struct WeightedEdge {
  double weight;
  Edge edge;
};

}  // namespace

std::vector<std::uint32_t> GeoSetPartition::set_sizes() const {
  std::vector<std::uint32_t> sizes(set_count, 0);
  for (auto label : labels) ++sizes.at(label);
  return sizes;
}

void validate(const GeoSetPartition& partition) {
  std::vector<bool> seen(partition.set_count, false);
  for (auto label : partition.labels) {
    if (label >= partition.set_count)
      throw InvalidArgument("label " + std::to_string(label) + " exceeds set count");
    seen[label] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw InvalidArgument("partition has an empty set");
}

double edge_weight(const Vec3& n_i, const Vec3& n_j, const Vec3& p_i, const Vec3& p_j,
                   bool convexity_relaxation) {
  const double w = std::max(0.0, 1.0 - n_i.dot(n_j));
  if (convexity_relaxation && n_i.dot(p_j - p_i) < 0.0) return w * w;
  return w;
}

GeoSetPartition segment(const PointCloud& cloud, const SegmentationParams& params) {
  if (!(params.k_threshold > 0.0)) throw InvalidArgument("k_threshold must be positive");
  if (params.min_size < 1) throw InvalidArgument("min_size must be at least 1");
  if (!cloud.has_normals() && cloud.size() > 0) throw InvalidArgument("segmentation needs normals");
  validate(cloud);

  const std::size_t n = cloud.size();
  std::vector<WeightedEdge> edges;
  edges.reserve(cloud.edges.size());
  for (const auto& e : cloud.edges) {
    edges.push_back({edge_weight(cloud.normals[e.a], cloud.normals[e.b], cloud.positions[e.a],
                                 cloud.positions[e.b], params.convexity_relaxation),
                     e});
  }
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    return std::tie(x.weight, x.edge) < std::tie(y.weight, y.edge);
  });

  DisjointSets sets(n);
  for (const auto& [w, e] : edges) {
    const auto a = sets.find(e.a);
    const auto b = sets.find(e.b);
    if (a == b) continue;
    const double tol_a = sets.internal(a) + params.k_threshold / sets.size(a);
    const double tol_b = sets.internal(b) + params.k_threshold / sets.size(b);
    if (w <= std::min(tol_a, tol_b)) sets.join(a, b, w);
  }

  // Scanning in ascending order means a small component is absorbed across
  // its cheapest crossing edge.
  if (params.min_size > 1) {
    for (const auto& [w, e] : edges) {
      const auto a = sets.find(e.a);
      const auto b = sets.find(e.b);
      if (a == b) continue;
      if (sets.size(a) < params.min_size || sets.size(b) < params.min_size) sets.join(a, b, w);
    }
  }

  GeoSetPartition partition;
  partition.labels.resize(n);
  std::vector<std::uint32_t> dense(n, std::numeric_limits<std::uint32_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = sets.find(static_cast<std::uint32_t>(i));
    if (dense[root] == std::numeric_limits<std::uint32_t>::max()) dense[root] = partition.set_count++;
    partition.labels[i] = dense[root];
  }
  return partition;
}

}  // namespace geoset
