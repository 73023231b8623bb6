#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kickwave/action.hpp"

using namespace kickwave;

namespace {

Environment random_env(std::uint64_t seed, double intensity = 1.0) {
  EnvironmentConfig cfg;
  cfg.master_seed = seed;
  cfg.intensity = intensity;
  return Environment(cfg);
}

Path random_path(std::mt19937_64& rng, std::size_t len, std::int64_t t0) {
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> x{step(rng) * 3.0};
  while (x.size() < len) x.push_back(x.back() + step(rng));
  return Path(t0, x);
}

}  // namespace

TEST(Action, KineticExamples) {
  EXPECT_EQ(kinetic_action(Path(0, {0.0, 1.0})), 0.5);
  EXPECT_EQ(kinetic_action(Path(0, {0.0, 0.0, 0.0})), 0.0);
  EXPECT_EQ(kinetic_action(Path(0, {0.0, 1.0, 3.0})), 2.5);
  EXPECT_THROW(kinetic_action(Path(0, {1.0})), Error);
  EXPECT_THROW(Path(0, {}), Error);
}

TEST(Action, PotentialExamples) {
  const auto zero = Environment::zero();
  EXPECT_EQ(potential_action(zero, Path(0, {0.0, 1.0, 2.0})), 0.0);
  const auto env = random_env(3, 3.0);
  const Path two(4, {0.3, -0.2});
  EXPECT_EQ(potential_action(env, two, {1.0}), env.potential(4, 0.3));
  const Path g(2, {0.1, 0.7, 1.9, 1.2});
  const double d = potential_action(env, g, {1.0}) - potential_action(env, g, {0.0});
  EXPECT_NEAR(d, env.potential(2, 0.1) - env.potential(5, 1.2), 1e-14);
  EXPECT_THROW(potential_action(env, g, {1.5}), Error);
}

TEST(Action, TotalExamples) {
  const auto zero = Environment::zero();
  EXPECT_EQ(total_action(zero, Path(0, {0.0, 1.0})), 0.5);
  EXPECT_EQ(total_action(zero, Path(0, {2.0, 2.0}), {}, InitialPotential::linear(1.0)), 2.0);
}

TEST(Action, TotalMatchesTermwiseOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> up(0.0, 1.0);
  const auto env = random_env(9, 2.0);
  const auto w = InitialPotential::two_slope(-0.4, 0.7);
  for (int k = 0; k < 300; ++k) {
    const auto path = random_path(rng, 2 + k % 12, k % 7 - 3);
    const double p = up(rng);
    double oracle = w.value(path.x[0]);
    for (std::size_t j = 0; j + 1 < path.x.size(); ++j) {
      const double dx = path.x[j + 1] - path.x[j];
      oracle += dx * dx / 2.0;
      const auto t = path.start_time + static_cast<std::int64_t>(j);
      // each step carries p F(t) + (1 - p) F(t + 1)
      oracle += p * env.potential(t, path.x[j]) + (1.0 - p) * env.potential(t + 1, path.x[j + 1]);
    }
    EXPECT_NEAR(total_action(env, path, {p}, w), oracle, 1e-11 * (1.0 + std::abs(oracle)));
  }
}

TEST(Action, SplittingAtAnInteriorTime) {
  std::mt19937_64 rng(8);
  const auto env = random_env(10, 2.0);
  for (int k = 0; k < 100; ++k) {
    const auto path = random_path(rng, 10, 0);
    const double p = 0.3;
    const auto a = path.restrict(0, 4), b = path.restrict(4, 9);
    const double whole = kinetic_action(path) + potential_action(env, path, {p});
    const double parts = kinetic_action(a) + potential_action(env, a, {p}) + kinetic_action(b) +
                         potential_action(env, b, {p});
    EXPECT_NEAR(whole, parts, 1e-12);
  }
}

TEST(Action, ShearIdentityForKineticAction) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    const auto g = random_path(rng, 2 + k % 20, k % 5);
    const double a = u(rng), v = u(rng);
    std::vector<double> s(g.x.size());
    for (std::size_t j = 0; j < s.size(); ++j)
      s[j] = g.x[j] + a + v * static_cast<double>(g.start_time + static_cast<std::int64_t>(j));
    const Path gs(g.start_time, s);
    const double steps = static_cast<double>(g.length() - 1);
    const double expect = (g.x.back() - g.x.front()) * v + steps * v * v / 2.0;
    EXPECT_NEAR(kinetic_action(gs) - kinetic_action(g), expect, 1e-10 * (1.0 + kinetic_action(g)));
  }
}

TEST(Action, ElStepExamples) {
  const auto zero = Environment::zero();
  EXPECT_EQ(el_step(zero, 3, 0.0, 1.0), 2.0);
  const auto env = Environment::from_points({{1, 0.0, 0.5, 1.0}});
  // phi'(0.5) = -4 * 0.5 * 0.75 = -1.5
  EXPECT_DOUBLE_EQ(el_step(env, 1, 0.0, 0.5), 1.0 + 0.5 * -1.5);
}

TEST(Action, ElResidual) {
  const auto zero = Environment::zero();
  EXPECT_EQ(el_residual(zero, Path(0, {0.0, 0.5, 1.0, 1.5})), 0.0);
  const auto env = random_env(12, 2.0);
  const auto orbit = el_orbit(env, -3, 0.2, 0.9, 30);
  EXPECT_LE(el_residual(env, orbit), 1e-12 * (1.0 + max_excursion(orbit)));
  auto bumped = orbit;
  bumped.x[10] += 1e-3;
  EXPECT_GE(el_residual(env, bumped), 1e-3 * 0.999);
}

TEST(Action, SigmaAndExcursion) {
  EXPECT_EQ(sigma_statistic(Path(0, {0.0, 0.0, 0.0})), 2);
  EXPECT_EQ(max_excursion(Path(0, {0.0, 0.0, 0.0})), 0.0);
  EXPECT_EQ(sigma_statistic(Path(0, {0.0, 2.5})), 3);
  EXPECT_EQ(sigma_statistic(Path(0, {-0.5, 0.5})), 2);
  std::mt19937_64 rng(10);
  for (int k = 0; k < 100; ++k) {
    const auto g = random_path(rng, 2 + k % 9, 0);
    EXPECT_GE(sigma_statistic(g), static_cast<std::int64_t>(g.length() - 1));
  }
  EXPECT_EQ(max_excursion(Path(0, {1.0, -2.0, 3.5})), 3.0);
}
