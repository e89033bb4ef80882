#pragma once

#include "frustum/geom.hpp"

#include <random>

namespace frustum::detail {

using Rng = std::mt19937_64;

inline Vec3 gaussian3(Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double x = n01(rng);
  const double y = n01(rng);
  const double z = n01(rng);
  return {x, y, z};
}

inline Vec3 random_unit_vector(Rng& rng) {
  for (;;) {
    const Vec3 g = gaussian3(rng);
    const double n = g.norm();
    if (n > 1e-12) return g / n;
  }
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace frustum::detail
