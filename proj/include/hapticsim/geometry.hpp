#pragma once

#include "hapticsim/material.hpp"
#include "hapticsim/vec3.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hapticsim {

struct Sphere {
  Vec3 center;
  double radius = 0.0;
};

/// Segment [a, b] swept by a ball of `radius`.
struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

/// Layer of `thickness` centred on the plane through `point`; `normal` orients its upper face.
struct Slab {
  Vec3 point;
  Vec3 normal{0.0, 0.0, 1.0};
  double thickness = 0.0;
};

using Shape = std::variant<Sphere, Capsule, Slab>;

std::vector<std::string> shape_violations(const Shape &shape);

struct SurfacePoint {
  Vec3 point;
  Vec3 normal; // outward, unit length
};

/// Exact signed distance: negative inside, zero on the surface, positive outside.
double signed_distance(const Shape &shape, const Vec3 &p);

/// Nearest point on the boundary and the outward normal there. Queries on a degenerate
/// locus (sphere centre, capsule axis, slab midplane) resolve to a fixed direction: +z for
/// spheres, +z made perpendicular to the axis for capsules (+x if the axis is along z),
/// the slab's own normal for slabs.
SurfacePoint closest_surface_point(const Shape &shape, const Vec3 &p);

struct OrganModel {
  std::string organ_id;
  std::string name;
  Shape shape;
  HapticMaterial material;
};

/// Ordered organ list; order is part of the scene's identity.
struct Scene {
  std::vector<OrganModel> organs;

  const OrganModel *find(std::string_view organ_id) const;
  OrganModel *find(std::string_view organ_id);
};

struct NearestOrgan {
  std::size_t index = 0; // position in Scene::organs
  std::string organ_id;
  double signed_distance = 0.0;
  SurfacePoint surface;
};

/// Organ with the smallest signed distance to p; ties go to the lexicographically
/// smallest organ_id. Empty scene yields nullopt.
std::optional<NearestOrgan> scene_nearest(const Scene &scene, const Vec3 &p);

} // namespace hapticsim
