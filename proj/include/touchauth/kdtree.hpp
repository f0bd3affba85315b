#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace touchauth {

// Squared Euclidean distance, dimensions summed in index order. Every
// distance this module compares is produced by this one function, so
// exhaustive scans and tree queries see bit-identical values.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

struct Neighbor {
  double dist2;
  std::size_t index;

  // Ties on distance break toward the lower stored index, making neighbor
  // sets unique and scheduler-independent.
  friend bool operator<(const Neighbor& x, const Neighbor& y) {
    if (x.dist2 != y.dist2) return x.dist2 < y.dist2;
    return x.index < y.index;
  }
};

// Static k-d tree over a fixed point set; median splits on cycling axes.
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(std::vector<std::vector<double>> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("KdTree: empty point set");
    dims_ = points_.front().size();
    if (dims_ == 0) throw std::invalid_argument("KdTree: zero-dimensional points");
    for (const auto& p : points_) {
      if (p.size() != dims_) throw std::invalid_argument("KdTree: ragged point set");
    }
    std::vector<std::size_t> idx(points_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    nodes_.reserve(points_.size());
    root_ = build(idx, 0, idx.size(), 0);
  }

  std::size_t size() const { return points_.size(); }
  std::size_t dims() const { return dims_; }
  const std::vector<double>& point(std::size_t i) const { return points_[i]; }

  // k nearest neighbors of `query`, ascending by (dist2, index). Returns all
  // points when k exceeds the point count.
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const {
    if (query.size() != dims_) throw std::invalid_argument("KdTree::knn: query dimension mismatch");
    if (k == 0) throw std::invalid_argument("KdTree::knn: k must be positive");
    k = std::min(k, points_.size());
    std::vector<Neighbor> heap;  // max-heap: worst kept neighbor on top
    heap.reserve(k + 1);
    search(root_, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  struct Node {
    std::size_t point;
    std::size_t axis;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, std::size_t depth) {
    if (lo >= hi) return -1;
    const std::size_t axis = depth % dims_;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                     idx.begin() + static_cast<std::ptrdiff_t>(mid),
                     idx.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::size_t a, std::size_t b) {
                       if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                       return a < b;
                     });
    Node node;
    node.point = idx[mid];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(idx, lo, mid, depth + 1);
    const int right = build(idx, mid + 1, hi, depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  void offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor cand) const {
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end());
    } else if (cand < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(int node_id, std::span<const double> query, std::size_t k,
              std::vector<Neighbor>& heap) const {
    if (node_id < 0) return;
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    offer(heap, k, {squared_distance(query, points_[node.point]), node.point});

    const double diff = query[node.axis] - points_[node.point][node.axis];
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, query, k, heap);
    // The far half-space can still hold a point at exactly the current worst
    // distance but with a lower index, so prune only when strictly farther.
    if (heap.size() < k || diff * diff <= heap.front().dist2) {
      search(far, query, k, heap);
    }
  }

  std::vector<std::vector<double>> points_;
  std::vector<Node> nodes_;
  std::size_t dims_ = 0;
  int root_ = -1;
};

}  // namespace touchauth
