// Simulated belt-grinding environment: procedural stock/target shapes, a
// virtual grinding-resistance model for the cutting-surface deviation, and
// step dynamics with a protection interrupt.
//
// Lengths are in simulator units (the default objects are sized in mm).

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "csam/cutting.hpp"
#include "csam/point_cloud.hpp"

namespace csam {

/// A: flat stock over a wedge (tilted about x).
/// B: flat stock over a two-level step.
/// C: flat stock over a pyramidal frustum.
enum class ObjectKind { kA, kB, kC };

[[nodiscard]] std::string_view to_string(ObjectKind kind) noexcept;
[[nodiscard]] ObjectKind parse_object_kind(std::string_view s);

struct ObjectSpec {
  ObjectKind kind = ObjectKind::kA;
  double half_width = 20.0;   // x and y span [-half_width, half_width]
  double base_height = 0.0;   // bottom of the object
  double stock_top = 36.0;    // top of the initial stock
  double target_height = 20.0;  // A: wedge height at the origin, B: upper step, C: plateau
  double wedge_slope = 0.15;    // A: dz/dy of the wedge top
  double step_low = 15.0;       // B: lower step height (y < 0)
  double frustum_slope = 0.3;   // C: side slope
  double plateau_half = 10.0;   // C: plateau half width
  double density = 0.05;        // points per unit volume
  double jitter = 1.0;          // in-cell jitter as a fraction of the cell size

  void validate() const;

  /// Height of the target's top surface at (x, y).
  [[nodiscard]] double target_surface(double x, double y) const noexcept;
  [[nodiscard]] bool in_target(const Point& p) const noexcept {
    return p.z() <= target_surface(p.x(), p.y());
  }
};

struct ObjectClouds {
  PointCloud initial;
  PointCloud target;
};

/// Jittered-grid volume sampling of the stock and, with an independent
/// jitter stream, of the target region. Deterministic per seed; the grid
/// itself depends only on the spec.
[[nodiscard]] ObjectClouds make_object(const ObjectSpec& spec, std::uint64_t seed);

struct GtDeviationParams {
  double k_sim = 8.0;        // specific-resistance gain
  double lambda = 0.3;       // tangential/normal force ratio (unused by the deviation)
  double belt_speed = 10.0;  // S_g
  double angle_gain = 0.5;   // c_ang
  double v_max = 4.0;        // protection interrupt threshold on V_geom
  double dev_large = 330.0;  // deviation reported for interrupted actions

  void validate() const;
  /// The protection interrupt is driven by grinding resistance, so it only
  /// exists when k_sim > 0.
  [[nodiscard]] bool interrupts(double volume) const noexcept { return k_sim > 0.0 && volume > v_max; }
};

/// Ground-truth deviation of the cut height for removal volume V:
/// dev_large when interrupted, otherwise
/// (k_sim V / S_g) (1 + c_ang (|sin roll| + |sin pitch|)).
[[nodiscard]] double gt_deviation(const CuttingSurface& a, double volume,
                                  const GtDeviationParams& params);

struct EnvState {
  PointCloud current;
  PointCloud target;
  std::size_t step_index = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
};

struct TransitionRecord {
  CuttingSurface action;
  RemovalFeatures features;
  PointCloud removed;  // geometric removal for the commanded action
  double volume = 0.0;
  double deviation = 0.0;  // realised z deviation; dev_large if interrupted
  bool interrupted = false;
  PointCloud next;
};

struct EnvConfig {
  ObjectSpec object;
  GtDeviationParams resistance;
  ActionBounds bounds;
  FeatureMode mode = FeatureMode::kSim;
};

[[nodiscard]] EnvState reset(const ObjectSpec& spec, std::uint64_t seed, std::size_t horizon);

/// One grinding step. Interrupted actions leave the shape unchanged.
/// Throws std::logic_error once the horizon is exhausted.
[[nodiscard]] TransitionRecord step(EnvState& state, const CuttingSurface& a, const EnvConfig& config);

/// Stateful wrapper used by the learning loop.
class GrindingEnv {
 public:
  explicit GrindingEnv(EnvConfig config);

  const EnvState& reset(std::uint64_t seed, std::size_t horizon);
  TransitionRecord step(const CuttingSurface& a);

  [[nodiscard]] const EnvState& state() const noexcept { return state_; }
  [[nodiscard]] const EnvConfig& config() const noexcept { return config_; }

 private:
  EnvConfig config_;
  EnvState state_;
};

}  // namespace csam
