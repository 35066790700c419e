// Point-cloud state representation, ASCII I/O and shape-discrepancy metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace csam {

using Point = Eigen::Vector3d;

/// Ordered set of 3D points describing one object shape.
///
/// Coordinates are always finite. Order is preserved by every operation that
/// filters a cloud, so index-based bookkeeping stays valid.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Point> points);

  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] bool empty() const noexcept { return points_.empty(); }
  [[nodiscard]] const Point& operator[](std::size_t i) const { return points_[i]; }
  [[nodiscard]] std::span<const Point> points() const noexcept { return points_; }

  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }

  /// Appends a point; throws std::invalid_argument on NaN/Inf.
  void push_back(const Point& p);
  void reserve(std::size_t n) { points_.reserve(n); }

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.points_ == b.points_;
  }

 private:
  std::vector<Point> points_;
};

/// Axis-aligned extents of a cloud.
struct BoundingBox {
  double w = 0.0;  // x extent
  double h = 0.0;  // y extent
  double d = 0.0;  // z extent
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Symmetric Chamfer discrepancy: mean squared nearest-neighbour distance
/// from s1 to s2 plus the same from s2 to s1. Nearest neighbours come from a
/// kd-tree and the per-point queries run in parallel; the sums are taken
/// serially in point order so the result does not depend on the schedule.
[[nodiscard]] double chamfer(const PointCloud& s1, const PointCloud& s2);

/// O(|s1|*|s2|) serial reference for chamfer(). Kept for tests and benchmarks.
[[nodiscard]] double chamfer_brute_force(const PointCloud& s1, const PointCloud& s2);

/// Mean over `from` of the squared distance to the nearest point of `to`.
[[nodiscard]] double mean_nearest_sq_distance(const PointCloud& from, const PointCloud& to);

[[nodiscard]] BoundingBox bounding_box(const PointCloud& c);

/// Reads an ASCII "x y z" per line file. Blank lines and lines starting with
/// '#' are skipped. An empty file yields an empty cloud.
[[nodiscard]] PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// Uniform random subset without replacement of size min(n, |cloud|).
/// The relative order of the kept points is preserved.
[[nodiscard]] PointCloud downsample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

/// Indices chosen by downsample(); sorted ascending.
[[nodiscard]] std::vector<std::size_t> downsample_indices(std::size_t size, std::size_t n,
                                                          std::uint64_t seed);

/// Mean distance from each point to its nearest other point. Zero for
/// clouds with fewer than two points.
[[nodiscard]] double mean_nearest_neighbor_spacing(const PointCloud& c);

}  // namespace csam
