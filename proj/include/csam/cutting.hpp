// Geometric cutting model: cutting surfaces, cloud splitting and removal
// features.

#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "csam/point_cloud.hpp"

namespace csam {

/// Robot action: an oriented cutting plane about the work origin.
/// roll/pitch in radians, z is the plane height at the origin.
struct CuttingSurface {
  double roll = 0.0;
  double pitch = 0.0;
  double z = 0.0;

  friend bool operator==(const CuttingSurface&, const CuttingSurface&) = default;
};

struct ActionBounds {
  double roll_max = 0.35;
  double pitch_max = 0.35;
  double z_min = 12.0;
  double z_max = 45.0;

  [[nodiscard]] bool contains(const CuttingSurface& a) const noexcept;
  [[nodiscard]] CuttingSurface clamp(const CuttingSurface& a) const noexcept;
  void validate() const;
};

/// {p : normal . p = offset}; points with normal . p > offset are on the
/// tool side and get removed.
struct Plane {
  Point normal = Point::UnitZ();
  double offset = 0.0;

  [[nodiscard]] double signed_distance(const Point& p) const noexcept {
    return normal.dot(p) - offset;
  }
  [[nodiscard]] bool removes(const Point& p) const noexcept { return normal.dot(p) > offset; }
};

/// SIM: [V_geom, roll]. FULL: [V_geom, w, h, d, roll, pitch].
enum class FeatureMode { kSim, kFull };

[[nodiscard]] std::size_t feature_dim(FeatureMode mode) noexcept;
[[nodiscard]] std::string_view to_string(FeatureMode mode) noexcept;
[[nodiscard]] FeatureMode parse_feature_mode(std::string_view s);

struct RemovalFeatures {
  FeatureMode mode = FeatureMode::kSim;
  std::vector<double> values;

  [[nodiscard]] double removal_volume() const { return values.at(0); }
};

struct SplitResult {
  PointCloud kept;
  PointCloud removed;
};

/// Normal is +z rotated by roll about x, then by pitch about y; the plane
/// passes through (0, 0, a.z).
[[nodiscard]] Plane plane_from_action(const CuttingSurface& a) noexcept;

/// Partitions s into the points kept and the points on the tool side.
/// Points exactly on the plane are kept. Both outputs preserve input order.
[[nodiscard]] SplitResult split(const PointCloud& s, const CuttingSurface& a);
[[nodiscard]] SplitResult split(const PointCloud& s, const Plane& plane);

/// V_geom: mean unsigned distance of the removed points to the plane, 0 if
/// nothing is removed. A thickness proxy, not a true volume.
[[nodiscard]] double removal_volume(const PointCloud& removed, const Plane& plane);

[[nodiscard]] RemovalFeatures extract_features(const PointCloud& removed, const CuttingSurface& a,
                                               FeatureMode mode);

/// Shifts the cut height by delta and clamps it to [z_min, z_max].
[[nodiscard]] CuttingSurface apply_deviation(const CuttingSurface& a, double delta,
                                             const ActionBounds& bounds) noexcept;

}  // namespace csam
