// Static 3D kd-tree for nearest-neighbour queries over a fixed point set.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "csam/point_cloud.hpp"

namespace csam {

struct Neighbor {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double sq_dist = std::numeric_limits<double>::infinity();

  [[nodiscard]] bool valid() const noexcept {
    return index != std::numeric_limits<std::size_t>::max();
  }
};

/// Indices returned by queries refer to positions in the span passed to the
/// constructor. The tree keeps its own copy of the points.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Point> points, std::size_t leaf_size = 8);

  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] bool empty() const noexcept { return points_.empty(); }

  [[nodiscard]] Neighbor nearest(const Point& q) const;

  /// Nearest point whose mask entry is non-zero; invalid Neighbor if none.
  [[nodiscard]] Neighbor nearest_alive(const Point& q, std::span<const std::uint8_t> alive) const;

  /// Per-node live-point counts for the masked queries below; starts with
  /// every point alive.
  [[nodiscard]] std::vector<std::uint32_t> full_counts() const;

  /// Marks point `index` dead in `counts` (alive mask kept by the caller).
  void erase(std::size_t index, std::span<std::uint32_t> counts) const;

  /// nearest_alive() that skips subtrees whose count is zero. `counts` must
  /// be consistent with `alive`.
  [[nodiscard]] Neighbor nearest_alive(const Point& q, std::span<const std::uint8_t> alive,
                                       std::span<const std::uint32_t> counts) const;

  /// Up to k nearest neighbours, closest first.
  [[nodiscard]] std::vector<Neighbor> k_nearest(const Point& q, std::size_t k) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t parent = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t leaf_size);

  template <typename Visit>
  void search(std::int32_t node, const Point& q, double& bound, Visit&& visit) const;
  template <typename Visit, typename Skip>
  void search_cell(std::int32_t node, const Point& q, double cell_sq, Point& offset, double& bound,
                   Visit& visit, const Skip& skip) const;

  std::vector<Point> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> leaf_of_;  // leaf node holding each point
};

}  // namespace csam
