#include "csam/kd_tree.hpp"

#include <algorithm>
#include <numeric>

namespace csam {

KdTree::KdTree(std::span<const Point> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / std::max<std::size_t>(leaf_size, 1) + 1);
    build(0, static_cast<std::uint32_t>(points_.size()), std::max<std::size_t>(leaf_size, 1));
    leaf_of_.resize(points_.size());
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      const Node& node = nodes_[n];
      if (node.left >= 0) {
        nodes_[static_cast<std::size_t>(node.left)].parent = static_cast<std::int32_t>(n);
        nodes_[static_cast<std::size_t>(node.right)].parent = static_cast<std::int32_t>(n);
      } else {
        for (std::uint32_t i = node.begin; i < node.end; ++i) leaf_of_[order_[i]] = static_cast<std::int32_t>(n);
      }
    }
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, -1, 0, 0.0});
  if (end - begin <= leaf_size) return id;

  Point lo = points_[order_[begin]];
  Point hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];

  const std::int32_t left = build(begin, mid, leaf_size);
  const std::int32_t right = build(mid, end, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  return id;
}

template <typename Visit>
void KdTree::search(std::int32_t node_id, const Point& q, double& bound, Visit&& visit) const {
  Point offset = Point::Zero();
  search_cell(node_id, q, 0.0, offset, bound, visit, [](std::int32_t) { return false; });
}

// Incremental cell distance: `cell_sq` is the squared distance from q to the
// node's cell and `offset` its per-axis components, so a far child is
// pruned with its true cell distance rather than the split distance alone.
template <typename Visit, typename Skip>
void KdTree::search_cell(std::int32_t node_id, const Point& q, double cell_sq, Point& offset,
                         double& bound, Visit& visit, const Skip& skip) const {
  if (skip(node_id)) return;
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) visit(order_[i], bound);
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff < 0.0 ? node.left : node.right;
  const std::int32_t far = diff < 0.0 ? node.right : node.left;
  search_cell(near, q, cell_sq, offset, bound, visit, skip);
  const double old = offset[node.axis];
  const double far_sq = cell_sq - old * old + diff * diff;
  if (far_sq <= bound) {
    offset[node.axis] = diff;
    search_cell(far, q, far_sq, offset, bound, visit, skip);
    offset[node.axis] = old;
  }
}

Neighbor KdTree::nearest(const Point& q) const {
  Neighbor best;
  if (points_.empty()) return best;
  double bound = best.sq_dist;
  search(0, q, bound, [&](std::uint32_t idx, double& b) {
    const double d = (points_[idx] - q).squaredNorm();
    if (d < b || (d == b && idx < best.index)) {
      best = {idx, d};
      b = d;
    }
  });
  return best;
}

Neighbor KdTree::nearest_alive(const Point& q, std::span<const std::uint8_t> alive) const {
  Neighbor best;
  if (points_.empty()) return best;
  double bound = best.sq_dist;
  search(0, q, bound, [&](std::uint32_t idx, double& b) {
    if (!alive[idx]) return;
    const double d = (points_[idx] - q).squaredNorm();
    if (d < b || (d == b && idx < best.index)) {
      best = {idx, d};
      b = d;
    }
  });
  return best;
}

std::vector<std::uint32_t> KdTree::full_counts() const {
  std::vector<std::uint32_t> counts(nodes_.size());
  for (std::size_t n = 0; n < nodes_.size(); ++n) counts[n] = nodes_[n].end - nodes_[n].begin;
  return counts;
}

void KdTree::erase(std::size_t index, std::span<std::uint32_t> counts) const {
  for (std::int32_t n = leaf_of_[index]; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent) {
    --counts[static_cast<std::size_t>(n)];
  }
}

Neighbor KdTree::nearest_alive(const Point& q, std::span<const std::uint8_t> alive,
                               std::span<const std::uint32_t> counts) const {
  Neighbor best;
  if (points_.empty()) return best;
  double bound = best.sq_dist;
  Point offset = Point::Zero();
  auto visit = [&](std::uint32_t idx, double& b) {
    if (!alive[idx]) return;
    const double d = (points_[idx] - q).squaredNorm();
    if (d < b || (d == b && idx < best.index)) {
      best = {idx, d};
      b = d;
    }
  };
  search_cell(0, q, 0.0, offset, bound, visit,
              [&](std::int32_t n) { return counts[static_cast<std::size_t>(n)] == 0; });
  return best;
}

std::vector<Neighbor> KdTree::k_nearest(const Point& q, std::size_t k) const {
  std::vector<Neighbor> heap;  // max-heap on sq_dist
  if (points_.empty() || k == 0) return heap;
  heap.reserve(k + 1);
  const auto cmp = [](const Neighbor& a, const Neighbor& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
  };
  double bound = std::numeric_limits<double>::infinity();
  search(0, q, bound, [&](std::uint32_t idx, double& b) {
    const double d = (points_[idx] - q).squaredNorm();
    if (heap.size() < k) {
      heap.push_back({idx, d});
      std::push_heap(heap.begin(), heap.end(), cmp);
      if (heap.size() == k) b = heap.front().sq_dist;
    } else if (cmp(Neighbor{idx, d}, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      heap.back() = {idx, d};
      std::push_heap(heap.begin(), heap.end(), cmp);
      b = heap.front().sq_dist;
    }
  });
  std::sort_heap(heap.begin(), heap.end(), cmp);
  return heap;
}

}  // namespace csam
