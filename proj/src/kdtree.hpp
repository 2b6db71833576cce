#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "geoset/geometry.hpp"

namespace geoset::detail {

// Static 3-d tree for exact k-nearest-neighbor queries. Neighbors are
// ranked by (squared distance, index), so results are reproducible under
// distance ties.
class KdTree {
 public:
  explicit KdTree(std::span<const Vec3> points) : points_(points) {
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), 0u);
    if (!order_.empty()) root_ = build(0, order_.size(), 0);
  }

  // k nearest to `query`, excluding index `skip` (pass -1 to keep all).
  std::vector<std::uint32_t> nearest(const Vec3& query, std::size_t k, long skip) const {
    Heap heap;
    if (root_ >= 0 && k > 0) search(root_, query, k, skip, heap);
    std::vector<Candidate> found;
    found.reserve(heap.size());
    while (!heap.empty()) {
      found.push_back(heap.top());
      heap.pop();
    }
    std::reverse(found.begin(), found.end());
    std::vector<std::uint32_t> out;
    out.reserve(found.size());
    for (const auto& c : found) out.push_back(c.second);
    return out;
  }

 private:
  using Candidate = std::pair<double, std::uint32_t>;
  using Heap = std::priority_queue<Candidate>;  // max-heap on (d2, index)

  struct Node {
    std::size_t begin, end;
    int axis;
    double split;
    int left = -1, right = -1;
  };

  static constexpr std::size_t kLeafSize = 12;

  int build(std::size_t begin, std::size_t end, int depth) {
    Node node{begin, end, -1, 0.0};
    if (end - begin > kLeafSize) {
      Vec3 lo = points_[order_[begin]], hi = lo;
      for (std::size_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
      }
      int axis = 0;
      (hi - lo).maxCoeff(&axis);
      if (hi[axis] > lo[axis]) {
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                           return points_[a][axis] < points_[b][axis];
                         });
        node.axis = axis;
        node.split = points_[order_[mid]][axis];
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid, end, depth + 1);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
      }
    }
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void search(int id, const Vec3& q, std::size_t k, long skip, Heap& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        if (static_cast<long>(idx) == skip) continue;
        const Candidate c{(points_[idx] - q).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    search(near, q, k, skip, heap);
    // Equal distances must still be visited so that index tie-breaking holds.
    if (heap.size() < k || diff * diff <= heap.top().first) search(far, q, k, skip, heap);
  }

  std::span<const Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace geoset::detail
