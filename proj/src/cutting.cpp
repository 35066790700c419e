#include "csam/cutting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace csam {

bool ActionBounds::contains(const CuttingSurface& a) const noexcept {
  return std::abs(a.roll) <= roll_max && std::abs(a.pitch) <= pitch_max && a.z >= z_min &&
         a.z <= z_max;
}

CuttingSurface ActionBounds::clamp(const CuttingSurface& a) const noexcept {
  return {std::clamp(a.roll, -roll_max, roll_max), std::clamp(a.pitch, -pitch_max, pitch_max),
          std::clamp(a.z, z_min, z_max)};
}

void ActionBounds::validate() const {
  if (!(roll_max >= 0.0) || !(pitch_max >= 0.0) || !(z_min <= z_max) || !std::isfinite(z_min) ||
      !std::isfinite(z_max)) {
    throw std::invalid_argument("ActionBounds: invalid bounds");
  }
}

std::size_t feature_dim(FeatureMode mode) noexcept { return mode == FeatureMode::kSim ? 2 : 6; }

std::string_view to_string(FeatureMode mode) noexcept {
  return mode == FeatureMode::kSim ? "sim" : "full";
}

FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "sim" || s == "SIM") return FeatureMode::kSim;
  if (s == "full" || s == "FULL") return FeatureMode::kFull;
  throw std::invalid_argument("unknown feature mode: " + std::string(s));
}

Plane plane_from_action(const CuttingSurface& a) noexcept {
  // R_y(pitch) * R_x(roll) * e_z
  const double cr = std::cos(a.roll);
  const double sr = std::sin(a.roll);
  const double cp = std::cos(a.pitch);
  const double sp = std::sin(a.pitch);
  Plane plane;
  plane.normal = Point(cr * sp, -sr, cr * cp);
  plane.offset = plane.normal.z() * a.z;
  return plane;
}

SplitResult split(const PointCloud& s, const Plane& plane) {
  SplitResult out;
  for (const auto& p : s) {
    if (plane.removes(p)) {
      out.removed.push_back(p);
    } else {
      out.kept.push_back(p);
    }
  }
  return out;
}

SplitResult split(const PointCloud& s, const CuttingSurface& a) {
  return split(s, plane_from_action(a));
}

double removal_volume(const PointCloud& removed, const Plane& plane) {
  if (removed.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : removed) sum += std::abs(plane.signed_distance(p));
  return sum / static_cast<double>(removed.size());
}

RemovalFeatures extract_features(const PointCloud& removed, const CuttingSurface& a,
                                 FeatureMode mode) {
  RemovalFeatures f{mode, {}};
  const double volume = removal_volume(removed, plane_from_action(a));
  if (mode == FeatureMode::kSim) {
    f.values = {volume, a.roll};
  } else {
    const BoundingBox box = removed.empty() ? BoundingBox{} : bounding_box(removed);
    f.values = {volume, box.w, box.h, box.d, a.roll, a.pitch};
  }
  return f;
}

CuttingSurface apply_deviation(const CuttingSurface& a, double delta,
                               const ActionBounds& bounds) noexcept {
  CuttingSurface out = a;
  out.z = std::clamp(a.z + delta, bounds.z_min, bounds.z_max);
  return out;
}

}  // namespace csam
