#include "hapticsim/geometry.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hapticsim;
using testing_support::random_shape;
using testing_support::random_vec;

namespace {

void expect_vec_near(const Vec3 &a, const Vec3 &b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

const Sphere kUnitish{{0, 0, 0}, 0.05};

} // namespace

TEST(SignedDistance, SphereInsideAndOnSurface) {
  EXPECT_NEAR(signed_distance(kUnitish, {0, 0.03, 0}), -0.02, 1e-15);
  EXPECT_EQ(signed_distance(kUnitish, {0.05, 0, 0}), 0.0);
}

TEST(SignedDistance, CapsuleMeasuresFromSegment) {
  const Capsule c{{0, 0, 0}, {0.1, 0, 0}, 0.01};
  EXPECT_NEAR(signed_distance(c, {0.05, 0.02, 0}), 0.01, 1e-15);
  // Past the end cap the distance is to the endpoint.
  EXPECT_NEAR(signed_distance(c, {0.13, 0.04, 0}), 0.05 - 0.01, 1e-15);
}

TEST(SignedDistance, SlabIsSymmetricAboutItsMidplane) {
  const Slab s{{0, 0, 0}, {0, 0, 1}, 0.02};
  EXPECT_NEAR(signed_distance(s, {0, 0, 0.005}), -0.005, 1e-15);
  EXPECT_NEAR(signed_distance(s, {0.3, -2, -0.015}), 0.005, 1e-15);
}

TEST(ClosestSurfacePoint, SphereRadialProjection) {
  const auto sp = closest_surface_point(kUnitish, {0, 0.04, 0});
  expect_vec_near(sp.point, {0, 0.05, 0}, 1e-15);
  expect_vec_near(sp.normal, {0, 1, 0}, 0.0);
}

TEST(ClosestSurfacePoint, SphereCentreFallsBackToPlusZ) {
  const auto sp = closest_surface_point(kUnitish, {0, 0, 0});
  EXPECT_EQ(sp.point, (Vec3{0, 0, 0.05}));
  EXPECT_EQ(sp.normal, (Vec3{0, 0, 1}));
}

TEST(ClosestSurfacePoint, CapsuleOnAxisUsesPerpendicularFallback) {
  const Capsule along_x{{0, 0, 0}, {0.1, 0, 0}, 0.01};
  const auto a = closest_surface_point(along_x, {0.05, 0, 0});
  EXPECT_EQ(a.normal, (Vec3{0, 0, 1}));
  expect_vec_near(a.point, {0.05, 0, 0.01}, 1e-15);

  const Capsule along_z{{0, 0, 0}, {0, 0, 0.1}, 0.01};
  const auto b = closest_surface_point(along_z, {0, 0, 0.05});
  EXPECT_EQ(b.normal, (Vec3{1, 0, 0}));
}

TEST(ClosestSurfacePoint, SlabNearestFace) {
  const Slab s{{0, 0, 0}, {0, 0, 1}, 0.02};
  auto up = closest_surface_point(s, {0, 0, 0.005});
  expect_vec_near(up.point, {0, 0, 0.01}, 1e-15);
  EXPECT_EQ(up.normal, (Vec3{0, 0, 1}));

  auto down = closest_surface_point(s, {0.01, 0, -0.004});
  expect_vec_near(down.point, {0.01, 0, -0.01}, 1e-15);
  EXPECT_EQ(down.normal, (Vec3{0, 0, -1}));

  auto mid = closest_surface_point(s, {0, 0, 0});
  EXPECT_EQ(mid.normal, (Vec3{0, 0, 1}));
}

TEST(ShapeViolations, RejectsBadParameters) {
  EXPECT_TRUE(shape_violations(kUnitish).empty());
  EXPECT_FALSE(shape_violations(Sphere{{0, 0, 0}, 0.0}).empty());
  EXPECT_FALSE(shape_violations(Capsule{{0, 0, 0}, {1, 0, 0}, -1.0}).empty());
  EXPECT_FALSE(shape_violations(Slab{{0, 0, 0}, {0, 0, 2}, 0.01}).empty());
  EXPECT_FALSE(shape_violations(Slab{{0, 0, 0}, {0, 0, 1}, 0.0}).empty());
}

TEST(SceneNearest, EmptySceneHasNoAnswer) { EXPECT_FALSE(scene_nearest(Scene{}, {0, 0, 0})); }

TEST(SceneNearest, PicksContainingSphere) {
  Scene scene;
  scene.organs.push_back({"b", "", Sphere{{0.2, 0, 0}, 0.05}, {}});
  scene.organs.push_back({"a", "", Sphere{{0, 0, 0}, 0.05}, {}});
  const auto hit = scene_nearest(scene, {0.01, 0, 0});
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->organ_id, "a");
  EXPECT_EQ(hit->index, 1u);
  EXPECT_LT(hit->signed_distance, 0.0);
}

TEST(SceneNearest, TieGoesToSmallerId) {
  Scene scene;
  scene.organs.push_back({"zeta", "", Sphere{{0.1, 0, 0}, 0.02}, {}});
  scene.organs.push_back({"alpha", "", Sphere{{-0.1, 0, 0}, 0.02}, {}});
  EXPECT_EQ(scene_nearest(scene, {0, 0.01, 0})->organ_id, "alpha");
}

// Central differences of the distance field must reproduce the reported normal, and
// projecting a surface point again must not move it.
class GeometryProperties : public ::testing::TestWithParam<int> {};

TEST_P(GeometryProperties, GradientMatchesNormalAndProjectionIsIdempotent) {
  std::mt19937_64 rng(1234 + GetParam());
  const double h = 1e-6;
  int checked = 0;
  while (checked < 300) {
    const Shape shape = random_shape(rng, GetParam());
    const Vec3 q = random_vec(rng, -0.1, 0.1);
    const auto sp = closest_surface_point(shape, q);
    ASSERT_NEAR(std::abs(signed_distance(shape, sp.point)), 0.0, 1e-9);
    ASSERT_NEAR(norm(sp.normal), 1.0, 1e-12);

    const auto again = closest_surface_point(shape, sp.point);
    EXPECT_LE(norm(again.point - sp.point), 1e-9);

    // Skip boundary points whose neighbourhood is not smooth at scale h.
    if (std::abs(signed_distance(shape, q)) < 1e-4)
      continue;
    const auto f = [&](Vec3 p) { return signed_distance(shape, p); };
    const Vec3 g{(f(sp.point + Vec3{h, 0, 0}) - f(sp.point - Vec3{h, 0, 0})) / (2 * h),
                 (f(sp.point + Vec3{0, h, 0}) - f(sp.point - Vec3{0, h, 0})) / (2 * h),
                 (f(sp.point + Vec3{0, 0, h}) - f(sp.point - Vec3{0, 0, h})) / (2 * h)};
    expect_vec_near(g, sp.normal, 1e-4);
    EXPECT_NEAR(norm(g), 1.0, 1e-4);
    ++checked;
  }
}

std::string kind_label(const ::testing::TestParamInfo<int> &info) {
  static const char *names[] = {"Sphere", "Capsule", "Slab"};
  return names[info.param];
}

INSTANTIATE_TEST_SUITE_P(AllKinds, GeometryProperties, ::testing::Values(0, 1, 2), kind_label);
