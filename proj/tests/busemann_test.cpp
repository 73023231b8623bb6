#include <gtest/gtest.h>

#include <cmath>

#include "kickwave/busemann.hpp"

using namespace kickwave;

namespace {
EnvironmentConfig env_config(std::uint64_t seed, double intensity = 1.0) {
  EnvironmentConfig cfg;
  cfg.master_seed = seed;
  cfg.intensity = intensity;
  return cfg;
}

BusemannOptions small_opts() {
  BusemannOptions o;
  o.horizon = 96;
  o.margin = 60.0;
  return o;
}
}  // namespace

TEST(Busemann, ZeroForcingIsLinearMinusDrift) {
  // straight minimizers of slope v: B = v (x2 - x1) - (n2 - n1) v^2 / 2
  const auto zero = Environment::zero();
  for (double v : {0.0, 0.5, -1.0}) {
    const auto b = busemann_estimate(zero, {0, 0.0}, {4, 1.25}, v, small_opts());
    EXPECT_FALSE(b.reliable);  // parallel lines never pair
    EXPECT_NEAR(b.value, v * 1.25 - 4 * v * v / 2, 1e-9) << v;
  }
}

TEST(Busemann, AntisymmetryAndAdditivity) {
  const Environment env(env_config(21));
  const SpacePoint p1{0, 0.0}, p2{2, 0.25}, p3{4, -0.25};
  const auto opt = small_opts();
  const auto field = busemann_field(env, {p1, p2, p3}, 0.25, opt);
  const auto b12 = busemann_from_field(env, field, p1, p2);
  const auto b21 = busemann_from_field(env, field, p2, p1);
  const auto b23 = busemann_from_field(env, field, p2, p3);
  const auto b13 = busemann_from_field(env, field, p1, p3);
  ASSERT_TRUE(b12.reliable && b23.reliable && b13.reliable)
      << b12.pairing_ks.size() << ' ' << b23.pairing_ks.size() << ' ' << b13.pairing_ks.size() << ' '
      << b12.untrusted << b23.untrusted << b13.untrusted;
  EXPECT_FALSE(b12.untrusted);
  EXPECT_NEAR(b12.value + b21.value, 0.0, 1e-12);
  EXPECT_NEAR(b12.value + b23.value, b13.value, 1e-8);
}

TEST(Busemann, BoundedByPointToPointAction) {
  const Environment env(env_config(5));
  const SpacePoint p1{0, 0.0}, p2{8, 1.0};
  for (double v : {0.0, 0.5}) {
    const auto b = busemann_estimate(env, p1, p2, v, small_opts());
    const auto a = point_to_point(env, p1.n, p1.x, p2.n, p2.x);
    EXPECT_LE(b.value, a.value + 1e-8) << v;
  }
}

TEST(Busemann, ResidualSeriesIsFlatOnceCoalesced) {
  const Environment env(env_config(13));
  const auto b = busemann_estimate(env, {0, 0.0}, {0, 2.0}, 0.0, small_opts());
  ASSERT_TRUE(b.reliable);
  ASSERT_GE(b.pairing_ks.size(), 2u);
  for (std::size_t i = 1; i < b.pairing_ks.size(); ++i) EXPECT_LT(b.pairing_ks[i], b.pairing_ks[i - 1]);
  EXPECT_LT(b.last_residual, 1e-8);
}

TEST(GlobalSolution, FixedPointOfTheEvolution) {
  const Environment env(env_config(3));
  GlobalSolutionOptions o;
  o.horizon = 48;
  o.margin = 40.0;
  const GlobalSolution gs(env, 0.0, 0, 2, -2.0, 2.0, o);
  const auto u0 = gs.potential(0);
  const auto u1 = gs.potential(1);
  EXPECT_FALSE(u0.trusted_empty());
  EXPECT_NEAR(u0.values[u0.size() / 2], 0.0, 1e-12);  // anchor (0, 0) is the window midpoint
  const auto rep = fixed_point_deviation(env, u0, u1);
  EXPECT_GT(rep.compared, u0.size() / 2);
  EXPECT_LT(rep.max_deviation, 1e-9);
  const auto vel = gs.velocity(1);
  EXPECT_EQ(vel.size(), u1.size());
}

TEST(Shocks, DetectsJumpsOfTheLagrangianMap) {
  const GridSpec g{-1.0, 0.125, 17};
  std::vector<double> u(17);
  for (std::size_t i = 0; i < 17; ++i) u[i] = g.x(i) < 0.0 ? 1.0 : -1.0;
  const auto shocks = detect_shocks(GridProfile(g, 0, u));
  ASSERT_EQ(shocks.size(), 1u);
  EXPECT_DOUBLE_EQ(shocks[0].x, -0.0625);
  EXPECT_GT(shocks[0].u_left, shocks[0].u_right);
  const auto none = detect_shocks(GridProfile(g, 0, std::vector<double>(17, 0.3)));
  EXPECT_TRUE(none.empty());
}

TEST(Shocks, TwoShocksMergeOnce) {
  // slopes 2, 0, -2 with breaks at -1.5, 1.5: shocks start at the breaks,
  // move inward at speed 1 and meet at t = 1.5
  const auto w0 = InitialPotential::piecewise_linear({-1.5, 1.5}, {2.0, 0.0, -2.0});
  const GridSpec g{-8.0, 1.0 / 64, 1025};
  const auto res = evolve(Environment::zero(), w0.sample(g, 0), 3);
  const auto forest = shock_genealogy(res.stack, 1, 3);
  ASSERT_EQ(forest.frames.size(), 3u);
  ASSERT_EQ(forest.frames[0].size(), 2u);
  EXPECT_NEAR(forest.frames[0][0].x, -0.5, 2.0 / 64);
  EXPECT_NEAR(forest.frames[0][1].x, 0.5, 2.0 / 64);
  ASSERT_EQ(forest.frames[1].size(), 1u);
  EXPECT_NEAR(forest.frames[1][0].x, 0.0, 2.0 / 64);
  EXPECT_EQ(forest.merges, 1u);
  for (const auto& r : forest.frames[0]) {
    ASSERT_TRUE(r.successor.has_value());
    EXPECT_EQ(*r.successor, 0u);
    EXPECT_FALSE(r.successor_nearest);
  }
}
