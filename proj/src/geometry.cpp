#include "hapticsim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hapticsim {

namespace {

constexpr double kUnitTolerance = 1e-9;

template <class... Ts> struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts> overloaded(Ts...) -> overloaded<Ts...>;

Vec3 closest_on_segment(const Capsule &c, const Vec3 &p) {
  const Vec3 ab = c.b - c.a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0)
    return c.a;
  const double t = std::clamp(dot(p - c.a, ab) / len2, 0.0, 1.0);
  return c.a + t * ab;
}

// Fallback radial direction for a query on the capsule axis.
Vec3 axis_perpendicular(const Capsule &c) {
  const Vec3 ab = c.b - c.a;
  const double len = norm(ab);
  if (len == 0.0)
    return {0.0, 0.0, 1.0};
  const Vec3 axis = (1.0 / len) * ab;
  Vec3 guess{0.0, 0.0, 1.0};
  if (std::abs(axis.z) > 1.0 - 1e-12)
    guess = {1.0, 0.0, 0.0};
  const Vec3 perp = guess - dot(guess, axis) * axis;
  return (1.0 / norm(perp)) * perp;
}

SurfacePoint radial_projection(const Vec3 &core, double radius, const Vec3 &p,
                               const Vec3 &fallback) {
  const Vec3 d = p - core;
  const double len = norm(d);
  const Vec3 n = len > 0.0 ? (1.0 / len) * d : fallback;
  return {core + radius * n, n};
}

} // namespace

std::vector<std::string> shape_violations(const Shape &shape) {
  std::vector<std::string> out;
  std::visit(overloaded{
                 [&](const Sphere &s) {
                   if (!is_finite(s.center))
                     out.emplace_back("sphere center must be finite");
                   if (!(s.radius > 0.0) || !std::isfinite(s.radius))
                     out.emplace_back("sphere radius must be > 0");
                 },
                 [&](const Capsule &c) {
                   if (!is_finite(c.a) || !is_finite(c.b))
                     out.emplace_back("capsule endpoints must be finite");
                   if (!(c.radius > 0.0) || !std::isfinite(c.radius))
                     out.emplace_back("capsule radius must be > 0");
                 },
                 [&](const Slab &s) {
                   if (!is_finite(s.point) || !is_finite(s.normal))
                     out.emplace_back("slab point and normal must be finite");
                   else if (std::abs(norm(s.normal) - 1.0) > kUnitTolerance)
                     out.emplace_back("slab normal must be unit length");
                   if (!(s.thickness > 0.0) || !std::isfinite(s.thickness))
                     out.emplace_back("slab thickness must be > 0");
                 },
             },
             shape);
  return out;
}

double signed_distance(const Shape &shape, const Vec3 &p) {
  return std::visit(overloaded{
                        [&](const Sphere &s) { return norm(p - s.center) - s.radius; },
                        [&](const Capsule &c) {
                          return norm(p - closest_on_segment(c, p)) - c.radius;
                        },
                        [&](const Slab &s) {
                          return std::abs(dot(p - s.point, s.normal)) - 0.5 * s.thickness;
                        },
                    },
                    shape);
}

SurfacePoint closest_surface_point(const Shape &shape, const Vec3 &p) {
  return std::visit(overloaded{
                        [&](const Sphere &s) {
                          return radial_projection(s.center, s.radius, p, {0.0, 0.0, 1.0});
                        },
                        [&](const Capsule &c) {
                          return radial_projection(closest_on_segment(c, p), c.radius, p,
                                                   axis_perpendicular(c));
                        },
                        [&](const Slab &s) {
                          const double offset = dot(p - s.point, s.normal);
                          const double side = offset >= 0.0 ? 1.0 : -1.0;
                          const Vec3 n = side * s.normal;
                          return SurfacePoint{p + (side * 0.5 * s.thickness - offset) * s.normal,
                                              n};
                        },
                    },
                    shape);
}

const OrganModel *Scene::find(std::string_view organ_id) const {
  for (const auto &o : organs)
    if (o.organ_id == organ_id)
      return &o;
  return nullptr;
}

OrganModel *Scene::find(std::string_view organ_id) {
  for (auto &o : organs)
    if (o.organ_id == organ_id)
      return &o;
  return nullptr;
}

std::optional<NearestOrgan> scene_nearest(const Scene &scene, const Vec3 &p) {
  std::optional<NearestOrgan> best;
  for (std::size_t i = 0; i < scene.organs.size(); ++i) {
    const auto &organ = scene.organs[i];
    const double sd = signed_distance(organ.shape, p);
    if (!best || sd < best->signed_distance ||
        (sd == best->signed_distance && organ.organ_id < best->organ_id)) {
      best = NearestOrgan{i, organ.organ_id, sd, {}};
    }
  }
  if (best)
    best->surface = closest_surface_point(scene.organs[best->index].shape, p);
  return best;
}

} // namespace hapticsim
