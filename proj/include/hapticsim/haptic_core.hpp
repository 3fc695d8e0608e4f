#pragma once

// Extended spring-damper haptic rendering:
//
//   F = -k (x - x0) - b v - mu N - p_t
//
// evaluated per tick against a proxy point x0 held on the organ surface.
// Vector convention: with outward unit normal n and penetration depth d >= 0 the
// stylus sits at x = x0 - d n, so the spring term is +k d n. Damping acts on the
// normal velocity component, friction opposes tangential sliding, and the pop
// term pushes along +n until the tissue is punctured.

#include "hapticsim/geometry.hpp"
#include "hapticsim/material.hpp"
#include "hapticsim/vec3.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace hapticsim {

enum class Phase { Free, Contact, Penetrated };
enum class PhaseEvent { ContactStart, PopThrough, ContactEnd };

std::string_view to_string(Phase p);
std::string_view to_string(PhaseEvent e);
std::optional<Phase> phase_from_string(std::string_view s);

struct StylusSample {
  double time = 0.0; // s since session start
  Vec3 position;     // m
  Vec3 velocity;     // m/s, filtered
};

struct ContactState {
  std::optional<std::string> organ_id;
  Vec3 proxy_position; // x0
  double depth = 0.0;  // > 0 means penetration
  Vec3 normal;         // outward unit normal at proxy_position
  Phase phase = Phase::Free;
};

struct ForceBreakdown {
  Vec3 spring;
  Vec3 damping;
  Vec3 friction;
  Vec3 pop;
  double normal_force = 0.0; // N in the friction term, = k_eff * d
  Vec3 unclamped;            // spring + damping + friction + pop
  Vec3 total;                // unclamped limited to f_max
  bool clamped = false;
};

struct ForceParams {
  double v_deadband = 1e-4; // m/s, friction off below this sliding speed
  double f_max = 3.3;       // N, device envelope
};

/// Deepest-penetrated organ (ties: lowest organ_id) with its proxy point and normal.
/// organ_id is empty when nothing is penetrated; depth then carries minus the distance
/// to the nearest organ (0 for an empty scene). The phase is left Free for the caller.
/// Throws InputError for a non-finite position.
ContactState resolve_contact(const Scene &scene, const Vec3 &position);

/// Exponentially smoothed finite-difference velocity. Throws InputError if dt <= 0
/// or alpha is outside (0, 1].
Vec3 estimate_velocity(const Vec3 &prev_filtered, const Vec3 &prev_position, const Vec3 &position,
                       double dt, double alpha);

struct PhaseStep {
  Phase phase = Phase::Free;
  std::optional<PhaseEvent> event;
};

/// Contact/puncture state machine. Emits at most one event per call; once punctured,
/// stays Penetrated until depth <= 0.
PhaseStep step_phase(Phase prev, double depth, const HapticMaterial &material);

/// Throws ConfigError if f_max <= 0.
Vec3 clamp_force(const Vec3 &raw, double f_max);

/// Term-by-term force for one contact. Every term is exactly zero when depth <= 0.
/// Throws InputError if the normal is not unit length while in contact.
ForceBreakdown compute_force(const HapticMaterial &material, const ContactState &contact,
                             const Vec3 &velocity, const ForceParams &params = {});

} // namespace hapticsim
