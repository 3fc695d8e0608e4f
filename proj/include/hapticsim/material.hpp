#pragma once

#include <string>
#include <vector>

namespace hapticsim {

/// Per-organ parameters of the extended spring-damper force model.
struct HapticMaterial {
  double stiffness_k = 0.0;              // N/m
  double damping_b = 0.0;                // N*s/m, applied to normal velocity
  double friction_mu = 0.0;              // kinetic friction coefficient
  double pop_force = 0.0;                // N, held along +normal until puncture
  double pop_depth = 0.005;              // m, puncture threshold
  double post_pop_stiffness_scale = 0.3; // stiffness multiplier once punctured

  friend bool operator==(const HapticMaterial &, const HapticMaterial &) = default;
};

/// Invariant violations, one human-readable message each; empty when valid.
std::vector<std::string> material_violations(const HapticMaterial &m);

/// Throws ConfigError listing every violation.
void validate_material(const HapticMaterial &m);

} // namespace hapticsim
