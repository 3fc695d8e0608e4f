#include "hapticsim/errors.hpp"
#include "hapticsim/haptic_core.hpp"
#include "force_oracle.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hapticsim;
using testing_support::random_unit;
using testing_support::random_vec;

namespace {

void expect_vec_near(const Vec3 &a, const Vec3 &b, double tol = 1e-12) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

ContactState touching(double depth, Vec3 normal, Phase phase) {
  ContactState c;
  c.organ_id = "organ";
  c.depth = depth;
  c.normal = normal;
  c.phase = phase;
  return c;
}

Scene one_sphere() {
  Scene s;
  s.organs.push_back({"ball", "ball", Sphere{{0, 0, 0}, 0.05}, {500, 0, 0, 0, 0.005, 0.3}});
  return s;
}

} // namespace

TEST(ResolveContact, OutsideSphereReportsNegativeDepth) {
  const auto c = resolve_contact(one_sphere(), {0, 0.06, 0});
  EXPECT_FALSE(c.organ_id);
  EXPECT_NEAR(c.depth, -0.01, 1e-15);
}

TEST(ResolveContact, InsideSphereProjectsToSurface) {
  const auto c = resolve_contact(one_sphere(), {0, 0.04, 0});
  ASSERT_TRUE(c.organ_id);
  EXPECT_EQ(*c.organ_id, "ball");
  expect_vec_near(c.proxy_position, {0, 0.05, 0});
  EXPECT_NEAR(c.depth, 0.01, 1e-15);
  EXPECT_EQ(c.normal, (Vec3{0, 1, 0}));
  EXPECT_EQ(c.phase, Phase::Free);
}

TEST(ResolveContact, EmptySceneNeverTouches) {
  const auto c = resolve_contact(Scene{}, {1, 2, 3});
  EXPECT_FALSE(c.organ_id);
  EXPECT_LE(c.depth, 0.0);
}

TEST(ResolveContact, DeepestOrganWins) {
  Scene s = one_sphere();
  s.organs.push_back({"aaa", "", Sphere{{0, 0.07, 0}, 0.03}, {}});
  // Depth 0.002 in the ball, 0.008 in the small sphere.
  const auto c = resolve_contact(s, {0, 0.048, 0});
  ASSERT_TRUE(c.organ_id);
  EXPECT_EQ(*c.organ_id, "aaa");
  EXPECT_NEAR(c.depth, -signed_distance(s.organs[1].shape, {0, 0.048, 0}), 1e-12);
}

TEST(ResolveContact, RejectsNonFinitePosition) {
  EXPECT_THROW(resolve_contact(one_sphere(), {NAN, 0, 0}), InputError);
}

TEST(EstimateVelocity, SmoothsFiniteDifference) {
  expect_vec_near(estimate_velocity({}, {}, {0.001, 0, 0}, 0.001, 0.2), {0.2, 0, 0});
  expect_vec_near(estimate_velocity({}, {0.3, 0.1, 0}, {0.3, 0.1, 0}, 0.001, 0.7), {0, 0, 0});
  expect_vec_near(estimate_velocity({5, 5, 5}, {}, {0, 0.002, 0}, 0.001, 1.0), {0, 2.0, 0});
}

TEST(EstimateVelocity, RejectsBadStep) {
  EXPECT_THROW(estimate_velocity({}, {}, {}, 0.0, 0.2), InputError);
  EXPECT_THROW(estimate_velocity({}, {}, {}, -1.0, 0.2), InputError);
  EXPECT_THROW(estimate_velocity({}, {}, {}, 0.001, 0.0), InputError);
}

TEST(StepPhase, Transitions) {
  HapticMaterial m;
  m.pop_depth = 0.003;
  auto s = step_phase(Phase::Free, 0.001, m);
  EXPECT_EQ(s.phase, Phase::Contact);
  EXPECT_EQ(s.event, PhaseEvent::ContactStart);

  s = step_phase(Phase::Contact, 0.004, m);
  EXPECT_EQ(s.phase, Phase::Penetrated);
  EXPECT_EQ(s.event, PhaseEvent::PopThrough);

  s = step_phase(Phase::Free, 0.0, m);
  EXPECT_EQ(s.phase, Phase::Free);
  EXPECT_FALSE(s.event);

  s = step_phase(Phase::Penetrated, 0.0001, m);
  EXPECT_EQ(s.phase, Phase::Penetrated);
  EXPECT_FALSE(s.event);

  s = step_phase(Phase::Penetrated, -0.001, m);
  EXPECT_EQ(s.phase, Phase::Free);
  EXPECT_EQ(s.event, PhaseEvent::ContactEnd);
}

TEST(StepPhase, DipAndReturnPopsOnce) {
  HapticMaterial m;
  m.pop_depth = 0.004;
  const double trace[] = {0.0, 0.001, 0.003, 0.005, 0.006, 0.004, 0.002, 0.003, 0.005, 0.007};
  Phase p = Phase::Free;
  int pops = 0;
  for (double d : trace) {
    const auto s = step_phase(p, d, m);
    pops += s.event == PhaseEvent::PopThrough;
    p = s.phase;
  }
  EXPECT_EQ(pops, 1);
}

TEST(ClampForce, Envelope) {
  EXPECT_EQ(clamp_force({0, 2, 0}, 3.3), (Vec3{0, 2, 0}));
  expect_vec_near(clamp_force({0, 6.6, 0}, 3.3), {0, 3.3, 0});
  EXPECT_EQ(clamp_force({}, 1.0), (Vec3{}));
  EXPECT_THROW(clamp_force({1, 0, 0}, 0.0), ConfigError);
}

TEST(ComputeForce, SpringPlusPopInContact) {
  HapticMaterial m{500, 0, 0, 0.5, 0.005, 0.3};
  const auto f = compute_force(m, touching(0.002, {0, 1, 0}, Phase::Contact), {});
  expect_vec_near(f.spring, {0, 1.0, 0});
  expect_vec_near(f.pop, {0, 0.5, 0});
  expect_vec_near(f.total, {0, 1.5, 0});
  EXPECT_FALSE(f.clamped);
}

TEST(ComputeForce, DampingOpposesNormalVelocity) {
  HapticMaterial m{500, 2, 0, 0, 0.005, 1.0};
  const auto f = compute_force(m, touching(0.002, {0, 1, 0}, Phase::Penetrated), {0, -0.1, 0});
  expect_vec_near(f.spring, {0, 1.0, 0});
  expect_vec_near(f.damping, {0, 0.2, 0});
  expect_vec_near(f.total, {0, 1.2, 0});
}

TEST(ComputeForce, FrictionOpposesSliding) {
  HapticMaterial m{1000, 0, 0.2, 0, 0.005, 1.0};
  const auto f = compute_force(m, touching(0.001, {0, 1, 0}, Phase::Penetrated), {0.05, 0, 0});
  EXPECT_NEAR(f.normal_force, 1.0, 1e-12);
  expect_vec_near(f.friction, {-0.2, 0, 0});
  expect_vec_near(f.spring, {0, 1, 0});
  expect_vec_near(f.total, {-0.2, 1, 0});
}

TEST(ComputeForce, FrictionDeadband) {
  HapticMaterial m{1000, 0, 0.5, 0, 0.005, 1.0};
  const auto f = compute_force(m, touching(0.001, {0, 0, 1}, Phase::Contact), {5e-5, 0, 0});
  EXPECT_EQ(f.friction, (Vec3{}));
}

TEST(ComputeForce, PostPopStiffnessScale) {
  HapticMaterial m{1000, 0, 0, 0.4, 0.005, 0.3};
  const auto f = compute_force(m, touching(0.002, {1, 0, 0}, Phase::Penetrated), {});
  expect_vec_near(f.spring, {0.6, 0, 0});
  EXPECT_EQ(f.pop, (Vec3{}));
}

TEST(ComputeForce, ClampsAndRecordsUnclamped) {
  HapticMaterial m{5000, 0, 0, 0, 0.005, 1.0};
  ForceParams p;
  p.f_max = 3.3;
  const auto f = compute_force(m, touching(0.002, {0, 0, 1}, Phase::Contact), {}, p);
  expect_vec_near(f.unclamped, {0, 0, 10});
  expect_vec_near(f.total, {0, 0, 3.3});
  EXPECT_TRUE(f.clamped);
}

TEST(ComputeForce, RejectsNonUnitNormalInContact) {
  HapticMaterial m{500, 0, 0, 0, 0.005, 0.3};
  EXPECT_THROW(compute_force(m, touching(0.001, {0, 2, 0}, Phase::Contact), {}), InputError);
  // Outside contact the normal is irrelevant.
  EXPECT_NO_THROW(compute_force(m, touching(0.0, {0, 2, 0}, Phase::Free), {}));
}

// Randomized properties over contacts in both force-bearing phases.
TEST(ComputeForceProperties, HoldOverRandomInputs) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 5000; ++i) {
    HapticMaterial m{2000 * u(rng), 5 * u(rng), u(rng), u(rng), 0.001 + 0.01 * u(rng), u(rng)};
    const Vec3 n = random_unit(rng);
    const Vec3 v = random_vec(rng, -0.5, 0.5);
    const double depth = 0.01 * u(rng);
    const Phase phase = u(rng) < 0.5 ? Phase::Contact : Phase::Penetrated;
    const auto f = compute_force(m, touching(depth, n, phase), v);

    const double scale = 1.0 + norm(f.spring) * norm(f.friction);
    EXPECT_NEAR(dot(f.spring, f.friction), 0.0, 1e-12 * scale);
    EXPECT_NEAR(dot(f.damping, f.friction), 0.0, 1e-12 * (1.0 + norm(f.damping) * norm(f.friction)));
    EXPECT_LE(dot(f.friction, v), 1e-15);
    EXPECT_LE(dot(f.damping, v), 1e-15);
    EXPECT_LE(norm(f.total), 3.3 * (1 + 1e-12));
    EXPECT_NEAR(norm(cross(f.total, f.unclamped)), 0.0, 1e-9);
    expect_vec_near(f.unclamped, f.spring + f.damping + f.friction + f.pop, 1e-12);
  }
}

TEST(ComputeForceProperties, ZeroOutsideContact) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    HapticMaterial m{2000 * u(rng), 5 * u(rng), u(rng), u(rng), 0.005, u(rng)};
    const double depth = i == 0 ? 0.0 : -0.05 * u(rng);
    const Phase phase = static_cast<Phase>(i % 3);
    const auto f = compute_force(m, touching(depth, random_unit(rng), phase),
                                 random_vec(rng, -1, 1));
    EXPECT_EQ(f.spring, Vec3{});
    EXPECT_EQ(f.damping, Vec3{});
    EXPECT_EQ(f.friction, Vec3{});
    EXPECT_EQ(f.pop, Vec3{});
    EXPECT_EQ(f.total, Vec3{});
    EXPECT_EQ(f.normal_force, 0.0);
  }
}

TEST(ComputeForceProperties, MatchesOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    HapticMaterial m{2000 * u(rng), 5 * u(rng), u(rng), 2 * u(rng), 0.005, u(rng)};
    const Vec3 n = random_unit(rng);
    const Vec3 v = random_vec(rng, -0.5, 0.5);
    const double depth = 0.01 * u(rng);
    const bool pen = u(rng) < 0.5;
    const auto f = compute_force(m, touching(depth, n, pen ? Phase::Penetrated : Phase::Contact), v);
    const auto o = oracle::force({m.stiffness_k, m.damping_b, m.friction_mu, m.pop_force,
                                  m.post_pop_stiffness_scale, pen, depth, {n.x, n.y, n.z},
                                  {v.x, v.y, v.z}, 1e-4, 3.3});
    expect_vec_near(f.spring, {o.spring[0], o.spring[1], o.spring[2]}, 1e-9);
    expect_vec_near(f.damping, {o.damping[0], o.damping[1], o.damping[2]}, 1e-9);
    expect_vec_near(f.friction, {o.friction[0], o.friction[1], o.friction[2]}, 1e-9);
    expect_vec_near(f.pop, {o.pop[0], o.pop[1], o.pop[2]}, 1e-9);
    expect_vec_near(f.total, {o.total[0], o.total[1], o.total[2]}, 1e-9);
  }
}

TEST(ComputeForceProperties, PopDropsForceAtPuncture) {
  HapticMaterial m{800, 0.5, 0.2, 0.5, 0.003, 0.3};
  Phase phase = Phase::Free;
  double before = -1, after = -1;
  int pops = 0;
  for (int i = 0; i <= 100; ++i) {
    const double depth = 0.0001 * i - 0.001;
    const auto step = step_phase(phase, depth, m);
    auto c = touching(depth, {0, 0, 1}, step.phase);
    const double mag = norm(compute_force(m, c, {0, 0, -0.01}).total);
    if (step.event == PhaseEvent::PopThrough) {
      ++pops;
      after = mag;
    } else if (pops == 0) {
      before = mag;
    }
    phase = step.phase;
  }
  EXPECT_EQ(pops, 1);
  EXPECT_LT(after, before);
}
