#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "refmap/geometry.hpp"

namespace refmap {

/// Static 3D k-d tree over a point array that must outlive the tree.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  /// Indices of the k nearest points (including the query point itself when
  /// it is part of the set), nearest first.
  std::vector<std::size_t> knn(const Point3& query, std::size_t k) const;
  std::vector<std::size_t> radius(const Point3& query, double r) const;
  bool any_within(const Point3& query, double r) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    int axis;                // -1 for leaf
    double split;
    std::size_t left, right;
  };

  std::size_t build(std::size_t begin, std::size_t end);

  std::span<const Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace refmap
