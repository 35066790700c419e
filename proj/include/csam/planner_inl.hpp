#pragma once

#include <random>

namespace csam {

template <typename Rng>
CuttingSurface sample_action(const ActionBounds& b, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double roll = -b.roll_max + 2.0 * b.roll_max * unit(rng);
  const double pitch = -b.pitch_max + 2.0 * b.pitch_max * unit(rng);
  const double z = b.z_min + (b.z_max - b.z_min) * unit(rng);
  return {roll, pitch, z};
}

}  // namespace csam
