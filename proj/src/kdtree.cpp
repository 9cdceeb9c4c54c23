#include "refmap/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace refmap {

namespace {
constexpr std::size_t kLeafSize = 12;
}

KdTree::KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / kLeafSize + 2);
    build(0, order_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end) {
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end, -1, 0.0, 0, 0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::size_t> KdTree::knn(const Point3& query, std::size_t k) const {
  if (nodes_.empty() || k == 0) return {};
  // max-heap of (dist2, index)
  std::priority_queue<std::pair<double, std::size_t>> heap;
  auto worst = [&]() {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().first;
  };
  auto visit = [&](auto&& self, std::size_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (points_[idx] - query).squaredNorm();
        if (d2 < worst()) {
          heap.emplace(d2, idx);
          if (heap.size() > k) heap.pop();
        }
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const std::size_t near = diff < 0.0 ? node.left : node.right;
    const std::size_t far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    if (diff * diff < worst()) self(self, far);
  };
  visit(visit, 0);
  std::vector<std::size_t> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

std::vector<std::size_t> KdTree::radius(const Point3& query, double r) const {
  std::vector<std::size_t> out;
  if (nodes_.empty()) return out;
  const double r2 = r * r;
  auto visit = [&](auto&& self, std::size_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - query).squaredNorm() <= r2) out.push_back(order_[i]);
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    if (diff < r) self(self, node.left);
    if (diff >= -r) self(self, node.right);
  };
  visit(visit, 0);
  std::sort(out.begin(), out.end());
  return out;
}

bool KdTree::any_within(const Point3& query, double r) const {
  if (nodes_.empty()) return false;
  const double r2 = r * r;
  auto visit = [&](auto&& self, std::size_t node_id) -> bool {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        if ((points_[order_[i]] - query).squaredNorm() <= r2) return true;
      }
      return false;
    }
    const double diff = query[node.axis] - node.split;
    if (diff < r && self(self, node.left)) return true;
    return diff >= -r && self(self, node.right);
  };
  return visit(visit, 0);
}

}  // namespace refmap
