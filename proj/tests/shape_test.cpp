#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kickwave/shape.hpp"

using namespace kickwave;

namespace {
EnvironmentConfig env_config(std::uint64_t seed, double intensity = 1.0) {
  EnvironmentConfig cfg;
  cfg.master_seed = seed;
  cfg.intensity = intensity;
  return cfg;
}
}  // namespace

TEST(PointAction, ZeroEnvironment) {
  const auto zero = Environment::zero();
  EXPECT_EQ(point_action(zero, 16, 0.0).value, 0.0);
  for (double v : {0.5, 1.0, -0.75, 0.3}) {
    const auto r = point_action(zero, 16, v, {}, {1.0 / 64, 1.0});
    EXPECT_NEAR(r.value, 16 * v * v / 2, 1e-10);
    EXPECT_LE(std::abs(r.grid_value - 16 * v * v / 2), 16 * (1.0 / 64) * (1.0 / 64));
  }
}

TEST(PointAction, MatchesEnumerationOnTinyInstance) {
  // all paths 0 -> x over 3 steps on a coarse lattice, then the refined value
  // can only be lower than the lattice optimum
  const Environment env(env_config(9, 3.0));
  const double h = 0.25;
  const auto r = point_action(env, 3, 0.5, {}, {h, 1.0, false});
  double best = 1e300;
  for (int a = -12; a <= 12; ++a)
    for (int b = -12; b <= 12; ++b) {
      const Path p(0, {0.0, a * h, b * h, 1.5});
      best = std::min(best, total_action(env, p));
    }
  EXPECT_NEAR(r.grid_value, best, 1e-12);
  EXPECT_LE(r.value, r.grid_value + 1e-12);
}

TEST(PointActionTable, AgreesWithSingleQueries) {
  const Environment env(env_config(4));
  const auto tab = point_action_table(env, {0.0, 0.5}, {8, 16}, {}, {1.0 / 64, 2.0});
  const auto direct = point_action(env, 16, 0.5, {}, {1.0 / 64, 2.0});
  EXPECT_NEAR(tab[1][1].value, direct.value, 1e-9);
  EXPECT_FALSE(tab[1][1].untrusted);
}

TEST(ShapeStudy, ZeroEnvironmentIsExact) {
  ShapeStudyConfig cfg;
  cfg.env = env_config(1, 0.0);
  cfg.n = 16;
  cfg.replicas = 4;
  cfg.grid = {1.0 / 64, 1.0};
  const auto st = shape_study(cfg);
  for (const auto& e : st.estimates) {
    EXPECT_NEAR(e.mean, e.v * e.v / 2, 1e-12);
    EXPECT_NEAR(e.se, 0.0, 1e-12);
  }
  const auto q = quadratic_law_check(st.estimates, cfg.grid.h);
  EXPECT_TRUE(q.pass);
  for (const auto& r : q.rows) EXPECT_NEAR(r.residual, 0.0, 1e-12);
}

TEST(ShapeStudy, WorkerCountDoesNotChangeResults) {
  ShapeStudyConfig cfg;
  cfg.env = env_config(77);
  cfg.n = 16;
  cfg.replicas = 6;
  cfg.ps = {1.0, 0.0};
  cfg.grid = {1.0 / 32, 2.0};
  const auto a = shape_study(cfg, 1);
  const auto b = shape_study(cfg, 3);
  ASSERT_EQ(a.estimates.size(), b.estimates.size());
  for (std::size_t k = 0; k < a.estimates.size(); ++k) EXPECT_EQ(a.estimates[k].samples, b.estimates[k].samples);
}

TEST(ShapeStudy, PWeightOnlyMovesFixedEndpointTerms) {
  // endpoints are fixed, so A_p1 - A_p0 = F(0, 0) - F(n, v n) replica by replica
  ShapeStudyConfig cfg;
  cfg.env = env_config(78, 2.0);
  cfg.n = 16;
  cfg.replicas = 8;
  cfg.vs = {0.0, 0.5};
  cfg.ps = {1.0, 0.0};
  cfg.grid = {1.0 / 64, 2.0};
  const auto st = shape_study(cfg);
  for (double v : cfg.vs) {
    const auto& e1 = st.at(1.0, v);
    const auto& e0 = st.at(0.0, v);
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
      EnvironmentConfig ec = cfg.env;
      ec.master_seed = st.seeds[r];
      const Environment env(ec);
      const double expect = (env.potential(0, 0.0) - env.potential(16, v * 16)) / 16.0;
      EXPECT_NEAR(e1.samples[r] - e0.samples[r], expect, 1e-10);
    }
    EXPECT_TRUE(p_independence_check(e0, e1).pass);
  }
}

TEST(QuadraticLaw, FlagsViolation) {
  const auto zero = make_estimate(0.0, 8, 1.0, {1.0, 1.1, 0.9});
  const auto bad = make_estimate(1.0, 8, 1.0, {2.0, 2.1, 1.9});
  const auto rep = quadratic_law_check({zero, bad}, 1.0 / 64);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.rows[1].residual, 0.5, 1e-12);
}

TEST(ShearIdentity, ZeroEnvironmentExact) {
  const auto s = shear_action_identity(Environment::zero(), 8, 0.0, 1.0, 0.3, 0.7, {}, {1.0 / 64, 4.0, true, {}});
  EXPECT_NEAR(s.lhs, s.rhs, 1e-12);
  const auto id = shear_action_identity(Environment(env_config(3)), 8, 0.0, 1.0, 0.0, 0.0);
  EXPECT_EQ(id.lhs, id.rhs);
}

TEST(ShearIdentity, RandomEnvironment) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 6; ++k) {
    const Environment env(env_config(100 + k));
    const auto s = shear_action_identity(env, 16, 0.0, 2.0 * u(rng), 3.0 * u(rng), u(rng), {}, {1.0 / 64, 12.0, true, {}});
    EXPECT_FALSE(s.untrusted);
    EXPECT_NEAR(s.lhs, s.rhs, 1e-6);
  }
}

TEST(Tails, ZeroEnvironment) {
  TailStudyConfig cfg;
  cfg.env = env_config(2, 0.0);
  cfg.n = 16;
  cfg.replicas = 5;
  cfg.grid = {1.0 / 32, 1.0};
  const auto t = tail_study(cfg);
  for (double a : t.actions) EXPECT_EQ(a, 0.0);
  for (double e : t.excursions) EXPECT_EQ(e, 0.0);
  for (std::size_t k = 0; k < t.action_tail.u.size(); ++k)
    if (t.action_tail.u[k] > 0.0) {
      EXPECT_EQ(t.action_tail.p_hat[k], 0.0);
    }
  EXPECT_FALSE(t.action_tail.fit.has_value());
}

TEST(Tails, CurvesAreNonincreasing) {
  TailStudyConfig cfg;
  cfg.env = env_config(3);
  cfg.n = 16;
  cfg.replicas = 40;
  cfg.grid = {1.0 / 32, 2.0};
  const auto t = tail_study(cfg);
  for (std::size_t k = 1; k < t.action_tail.p_hat.size(); ++k)
    EXPECT_LE(t.action_tail.p_hat[k], t.action_tail.p_hat[k - 1]);
  for (std::size_t k = 1; k < t.excursion_tail.p_hat.size(); ++k)
    EXPECT_LE(t.excursion_tail.p_hat[k], t.excursion_tail.p_hat[k - 1]);
}

TEST(Stats, OlsRecoversLine) {
  std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9.0000001};
  const auto f = ols_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-6);
  EXPECT_NEAR(f.intercept, 1.0, 1e-6);
  EXPECT_LT(f.ci_lo, 2.0 + 1e-6);
  EXPECT_GT(f.ci_hi, 2.0 - 1e-6);
  // t quantile for 3 dof at 97.5%: 3.182446305
  EXPECT_NEAR(t_quantile(0.975, 3.0), 3.182446305, 1e-8);
}

TEST(Stats, KsTwoSample) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<double> a(500), b(500), c(500);
  for (auto& x : a) x = nd(rng);
  for (auto& x : b) x = nd(rng);
  for (auto& x : c) x = nd(rng) + 0.5;
  EXPECT_GT(ks_two_sample(a, b).p_value, 0.01);
  EXPECT_LT(ks_two_sample(a, c).p_value, 1e-6);
  // D = 1 for disjoint samples
  EXPECT_EQ(ks_two_sample({1, 2, 3}, {4, 5, 6}).statistic, 1.0);
}
