#pragma once

#include "hapticsim/geometry.hpp"
#include "hapticsim/vec3.hpp"

#include <filesystem>
#include <random>

namespace testing_support {

inline std::filesystem::path data_dir() { return HAPTICSIM_DATA_DIR; }
inline std::filesystem::path shipped_config() { return data_dir() / "kidney_transplant.yaml"; }

inline hapticsim::Vec3 random_vec(std::mt19937_64 &rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

inline hapticsim::Vec3 random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> g;
  for (;;) {
    const hapticsim::Vec3 v{g(rng), g(rng), g(rng)};
    const double n = hapticsim::norm(v);
    if (n > 1e-3)
      return v * (1.0 / n);
  }
}

inline hapticsim::Shape random_shape(std::mt19937_64 &rng, int kind) {
  std::uniform_real_distribution<double> size(0.005, 0.05);
  const auto c = random_vec(rng, -0.05, 0.05);
  switch (kind) {
  case 0:
    return hapticsim::Sphere{c, size(rng)};
  case 1:
    return hapticsim::Capsule{c, c + random_vec(rng, -0.05, 0.05), size(rng) * 0.5};
  default:
    return hapticsim::Slab{c, random_unit(rng), size(rng)};
  }
}

} // namespace testing_support
