#include "hapticsim/haptic_core.hpp"

#include "hapticsim/errors.hpp"

#include <cmath>

namespace hapticsim {

namespace {
constexpr double kUnitTolerance = 1e-9;

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }
} // namespace

std::vector<std::string> material_violations(const HapticMaterial &m) {
  std::vector<std::string> out;
  if (!finite_non_negative(m.stiffness_k))
    out.emplace_back("stiffness must be ≥ 0");
  if (!finite_non_negative(m.damping_b))
    out.emplace_back("damping must be ≥ 0");
  if (!finite_non_negative(m.friction_mu))
    out.emplace_back("friction must be ≥ 0");
  if (!finite_non_negative(m.pop_force))
    out.emplace_back("pop_force must be ≥ 0");
  if (!std::isfinite(m.pop_depth) || !(m.pop_depth > 0.0))
    out.emplace_back("pop_depth must be > 0");
  if (!std::isfinite(m.post_pop_stiffness_scale) || m.post_pop_stiffness_scale < 0.0 ||
      m.post_pop_stiffness_scale > 1.0)
    out.emplace_back("post_pop_stiffness_scale must be in [0, 1]");
  return out;
}

void validate_material(const HapticMaterial &m) {
  const auto problems = material_violations(m);
  if (problems.empty())
    return;
  std::string msg = "invalid material:";
  for (const auto &p : problems)
    msg += " " + p + ";";
  throw ConfigError(msg);
}

std::string_view to_string(Phase p) {
  switch (p) {
  case Phase::Free:
    return "free";
  case Phase::Contact:
    return "contact";
  case Phase::Penetrated:
    return "penetrated";
  }
  return "free";
}

std::string_view to_string(PhaseEvent e) {
  switch (e) {
  case PhaseEvent::ContactStart:
    return "contact_start";
  case PhaseEvent::PopThrough:
    return "pop_through";
  case PhaseEvent::ContactEnd:
    return "contact_end";
  }
  return "contact_start";
}

std::optional<Phase> phase_from_string(std::string_view s) {
  if (s == "free")
    return Phase::Free;
  if (s == "contact")
    return Phase::Contact;
  if (s == "penetrated")
    return Phase::Penetrated;
  return std::nullopt;
}

ContactState resolve_contact(const Scene &scene, const Vec3 &position) {
  if (!is_finite(position))
    throw InputError("resolve_contact: position must be finite");
  ContactState c;
  const auto nearest = scene_nearest(scene, position);
  if (!nearest) {
    c.proxy_position = position;
    return c;
  }
  c.depth = -nearest->signed_distance;
  c.proxy_position = nearest->surface.point;
  c.normal = nearest->surface.normal;
  if (c.depth > 0.0)
    c.organ_id = nearest->organ_id;
  return c;
}

Vec3 estimate_velocity(const Vec3 &prev_filtered, const Vec3 &prev_position, const Vec3 &position,
                       double dt, double alpha) {
  if (!(dt > 0.0))
    throw InputError("estimate_velocity: dt must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw InputError("estimate_velocity: alpha must be in (0, 1]");
  const Vec3 raw = (1.0 / dt) * (position - prev_position);
  return alpha * raw + (1.0 - alpha) * prev_filtered;
}

PhaseStep step_phase(Phase prev, double depth, const HapticMaterial &material) {
  if (!(depth > 0.0)) {
    if (prev == Phase::Free)
      return {Phase::Free, std::nullopt};
    return {Phase::Free, PhaseEvent::ContactEnd};
  }
  switch (prev) {
  case Phase::Free:
    return {Phase::Contact, PhaseEvent::ContactStart};
  case Phase::Contact:
    if (depth >= material.pop_depth)
      return {Phase::Penetrated, PhaseEvent::PopThrough};
    return {Phase::Contact, std::nullopt};
  case Phase::Penetrated:
    return {Phase::Penetrated, std::nullopt};
  }
  return {prev, std::nullopt};
}

Vec3 clamp_force(const Vec3 &raw, double f_max) {
  if (!(f_max > 0.0))
    throw ConfigError("clamp_force: f_max must be > 0");
  const double mag = norm(raw);
  if (mag <= f_max)
    return raw;
  return (f_max / mag) * raw;
}

ForceBreakdown compute_force(const HapticMaterial &material, const ContactState &contact,
                             const Vec3 &velocity, const ForceParams &params) {
  ForceBreakdown f;
  if (!(contact.depth > 0.0)) {
    // Still validate the envelope so a bad f_max surfaces on the first tick.
    clamp_force({}, params.f_max);
    return f;
  }
  const Vec3 &n = contact.normal;
  if (std::abs(norm(n) - 1.0) > kUnitTolerance)
    throw InputError("compute_force: contact normal must be unit length");

  const double d = contact.depth;
  const double k_eff = contact.phase == Phase::Penetrated
                           ? material.stiffness_k * material.post_pop_stiffness_scale
                           : material.stiffness_k;

  f.normal_force = k_eff * d;
  f.spring = f.normal_force * n;

  const Vec3 v_normal = dot(velocity, n) * n;
  f.damping = -material.damping_b * v_normal;

  const Vec3 v_tangent = velocity - v_normal;
  const double slide = norm(v_tangent);
  if (slide > params.v_deadband)
    f.friction = (-material.friction_mu * f.normal_force / slide) * v_tangent;

  if (contact.phase == Phase::Contact)
    f.pop = material.pop_force * n;

  f.unclamped = f.spring + f.damping + f.friction + f.pop;
  f.total = clamp_force(f.unclamped, params.f_max);
  f.clamped = !(f.total == f.unclamped);
  return f;
}

} // namespace hapticsim
