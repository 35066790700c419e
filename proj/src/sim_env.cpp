#include "csam/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace csam {

std::string_view to_string(ObjectKind kind) noexcept {
  switch (kind) {
    case ObjectKind::kA: return "A";
    case ObjectKind::kB: return "B";
    case ObjectKind::kC: return "C";
  }
  return "?";
}

ObjectKind parse_object_kind(std::string_view s) {
  if (s == "A" || s == "a") return ObjectKind::kA;
  if (s == "B" || s == "b") return ObjectKind::kB;
  if (s == "C" || s == "c") return ObjectKind::kC;
  throw std::invalid_argument("unknown object kind: " + std::string(s));
}

double ObjectSpec::target_surface(double x, double y) const noexcept {
  switch (kind) {
    case ObjectKind::kA:
      return target_height + wedge_slope * y;
    case ObjectKind::kB:
      return y < 0.0 ? step_low : target_height;
    case ObjectKind::kC: {
      const double dx = std::max(0.0, std::abs(x) - plateau_half);
      const double dy = std::max(0.0, std::abs(y) - plateau_half);
      return target_height - frustum_slope * std::max(dx, dy);
    }
  }
  return target_height;
}

void ObjectSpec::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(half_width) || !positive(density) || !(stock_top > base_height)) {
    throw std::invalid_argument("ObjectSpec: extents and density must be positive");
  }
  if (!(jitter >= 0.0 && jitter <= 1.0)) throw std::invalid_argument("ObjectSpec: jitter must be in [0, 1]");
  // The target surface is piecewise linear, so checking the corners, the
  // origin and the plateau/step breakpoints bounds it.
  const double w = half_width;
  const double probes[] = {-w, -plateau_half, 0.0, plateau_half, w};
  for (double x : probes) {
    for (double y : probes) {
      const double zt = target_surface(x, y);
      if (!(zt < stock_top) || !(zt > base_height)) {
        throw std::invalid_argument("ObjectSpec: target must lie strictly inside the stock");
      }
    }
  }
}

ObjectClouds make_object(const ObjectSpec& spec, std::uint64_t seed) {
  spec.validate();
  const double cell = std::cbrt(1.0 / spec.density);
  const double width = 2.0 * spec.half_width;
  const double height = spec.stock_top - spec.base_height;
  const auto nxy = std::max<long>(1, std::lround(width / cell));
  const auto nz = std::max<long>(1, std::lround(height / cell));
  const double cxy = width / static_cast<double>(nxy);
  const double cz = height / static_cast<double>(nz);

  std::mt19937_64 stock_rng(seed);
  std::mt19937_64 target_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-0.5, 0.5);

  ObjectClouds out;
  out.initial.reserve(static_cast<std::size_t>(nxy * nxy * nz));
  for (long i = 0; i < nxy; ++i) {
    for (long j = 0; j < nxy; ++j) {
      for (long k = 0; k < nz; ++k) {
        const Point center(-spec.half_width + (static_cast<double>(i) + 0.5) * cxy,
                           -spec.half_width + (static_cast<double>(j) + 0.5) * cxy,
                           spec.base_height + (static_cast<double>(k) + 0.5) * cz);
        const Point scale(cxy, cxy, cz);
        const Point jitter_s(u(stock_rng), u(stock_rng), u(stock_rng));
        const Point jitter_t(u(target_rng), u(target_rng), u(target_rng));
        out.initial.push_back(center + spec.jitter * jitter_s.cwiseProduct(scale));
        const Point pt = center + spec.jitter * jitter_t.cwiseProduct(scale);
        if (spec.in_target(pt)) out.target.push_back(pt);
      }
    }
  }
  if (out.target.empty()) throw std::invalid_argument("ObjectSpec: target region holds no points");
  return out;
}

void GtDeviationParams::validate() const {
  if (!(k_sim >= 0.0) || !(belt_speed > 0.0) || !(v_max > 0.0) || !(angle_gain >= 0.0) ||
      !(dev_large > 0.0)) {
    throw std::invalid_argument("GtDeviationParams: invalid values");
  }
}

double gt_deviation(const CuttingSurface& a, double volume, const GtDeviationParams& params) {
  if (volume < 0.0) throw std::invalid_argument("gt_deviation: negative removal volume");
  if (params.interrupts(volume)) return params.dev_large;
  return params.k_sim * volume / params.belt_speed *
         (1.0 + params.angle_gain * (std::abs(std::sin(a.roll)) + std::abs(std::sin(a.pitch))));
}

EnvState reset(const ObjectSpec& spec, std::uint64_t seed, std::size_t horizon) {
  auto clouds = make_object(spec, seed);
  EnvState s;
  s.current = std::move(clouds.initial);
  s.target = std::move(clouds.target);
  s.step_index = 0;
  s.horizon = horizon;
  s.seed = seed;
  return s;
}

TransitionRecord step(EnvState& state, const CuttingSurface& a, const EnvConfig& config) {
  if (state.step_index >= state.horizon) throw std::logic_error("step: task horizon exceeded");
  TransitionRecord rec;
  rec.action = a;
  const Plane plane = plane_from_action(a);
  auto geometric = split(state.current, plane);
  rec.volume = removal_volume(geometric.removed, plane);
  rec.features = extract_features(geometric.removed, a, config.mode);
  rec.removed = std::move(geometric.removed);

  if (config.resistance.interrupts(rec.volume)) {
    rec.interrupted = true;
    rec.deviation = config.resistance.dev_large;
    rec.next = state.current;
  } else {
    const double delta = gt_deviation(a, rec.volume, config.resistance);
    const CuttingSurface realised = apply_deviation(a, delta, config.bounds);
    rec.deviation = realised.z - a.z;
    rec.next = delta == 0.0 ? std::move(geometric.kept) : split(state.current, realised).kept;
  }
  state.current = rec.next;
  ++state.step_index;
  return rec;
}

GrindingEnv::GrindingEnv(EnvConfig config) : config_(std::move(config)) {
  config_.object.validate();
  config_.resistance.validate();
  config_.bounds.validate();
}

const EnvState& GrindingEnv::reset(std::uint64_t seed, std::size_t horizon) {
  state_ = csam::reset(config_.object, seed, horizon);
  return state_;
}

TransitionRecord GrindingEnv::step(const CuttingSurface& a) { return csam::step(state_, a, config_); }

}  // namespace csam
