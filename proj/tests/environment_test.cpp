#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kickwave/environment.hpp"

using namespace kickwave;

namespace {

Environment random_env(std::uint64_t seed, double intensity = 1.0) {
  EnvironmentConfig cfg;
  cfg.master_seed = seed;
  cfg.intensity = intensity;
  return Environment(cfg);
}

// Direct sum over an explicit point list; shares nothing with Environment.
double oracle_potential(const std::vector<KickPoint>& pts, double x) {
  double s = 0.0;
  for (const auto& p : pts) {
    const double y = (x - p.eta) / p.kappa;
    if (std::abs(y) < 1.0) s += p.xi * (1.0 - y * y) * (1.0 - y * y);
  }
  return s;
}

}  // namespace

TEST(Environment, CellPointsAreDeterministic) {
  const auto env = random_env(11);
  const auto a = env.cell_points(0, 5);
  random_env(11).cell_points(3, 9);
  const auto b = env.cell_points(0, 5);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, random_env(11).cell_points(0, 5));
}

TEST(Environment, CellPointsRespectMarkRanges) {
  const auto env = random_env(3, 4.0);
  for (std::int64_t i = -50; i < 50; ++i) {
    for (const auto& p : env.cell_points(2, i)) {
      EXPECT_EQ(p.tau, 2);
      EXPECT_GE(p.eta, static_cast<double>(i));
      EXPECT_LT(p.eta, static_cast<double>(i + 1));
      EXPECT_LE(std::abs(p.xi), 1.0);
      EXPECT_GT(p.kappa, 0.0);
      EXPECT_LE(p.kappa, 1.0);
    }
  }
}

TEST(Environment, MeanCountPerCell) {
  const auto env = random_env(2024);
  std::size_t total = 0;
  const std::int64_t cells = 100000;
  for (std::int64_t i = 0; i < cells; ++i) total += env.cell_points(0, i).size();
  const double mean = static_cast<double>(total) / static_cast<double>(cells);
  EXPECT_GE(mean, 0.99);
  EXPECT_LE(mean, 1.01);
}

TEST(Environment, ShiftByOneTimeStep) {
  const auto env = random_env(5);
  const auto sh = env.shifted(1, 0.0);
  for (std::int64_t n = -3; n <= 3; ++n)
    for (std::int64_t i = -3; i <= 3; ++i) {
      const auto a = sh.cell_points(n, i);
      auto b = env.cell_points(n + 1, i);
      for (auto& p : b) p.tau = n;
      EXPECT_EQ(a, b);
    }
}

TEST(Environment, ZeroIntensity) {
  const auto env = Environment::zero();
  EXPECT_EQ(env.potential(0, 0.3), 0.0);
  EXPECT_EQ(env.force(7, -2.1), 0.0);
  EXPECT_EQ(env.potential_max(0, -4.0), 0.0);
  EXPECT_TRUE(env.cell_points(0, 0).empty());
}

TEST(Environment, SingleBumpValues) {
  const auto env = Environment::from_points({{0, 0.0, 1.0, 1.0}});
  EXPECT_EQ(env.potential(0, 0.0), 1.0);
  EXPECT_EQ(env.potential(0, 1.0), 0.0);
  EXPECT_EQ(env.potential(0, -1.0), 0.0);
  EXPECT_EQ(env.potential(1, 0.0), 0.0);
  EXPECT_EQ(env.force(0, 0.0), 0.0);
  EXPECT_EQ(env.potential_max(0, -1.0), 1.0);

  const auto half = Environment::from_points({{0, 0.0, 0.5, 0.5}});
  EXPECT_DOUBLE_EQ(half.potential(0, 0.25), 0.28125);
}

TEST(Environment, ForceByHandFormula) {
  const auto env = Environment::from_points({{0, 0.2, -0.5, 0.4}});
  const double y = (0.3 - 0.2) / 0.4;
  EXPECT_DOUBLE_EQ(env.force(0, 0.3), -0.5 * (-4.0 * y * (1.0 - y * y)) / 0.4);
  EXPECT_DOUBLE_EQ(env.force_derivative(0, 0.3), -0.5 * (12.0 * y * y - 4.0) / (0.4 * 0.4));
}

// Central differences with step d have truncation error d^2/6 max|F'''|, and
// |F'''| <= 24 sum |xi| / kappa^3 over the contributing bumps. Points where that
// bound exceeds 1e-7 or where a bump edge (where F is only C^1) lies within d
// are outside the oracle's validity and are skipped.
TEST(Environment, ForceMatchesFiniteDifferenceOracle) {
  const double d = 1e-5;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ux(-200.0, 200.0);
  std::uniform_int_distribution<int> un(-20, 20);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto env = random_env(seed);
    int valid = 0;
    for (int k = 0; k < 1000; ++k) {
      const double x = ux(rng);
      const int n = un(rng);
      double bound = 0.0;
      bool near_edge = false;
      const auto c = static_cast<std::int64_t>(std::floor(x));
      for (std::int64_t i = c - 2; i <= c + 2; ++i)
        for (const auto& p : env.cell_points(n, i)) {
          const double r = std::abs(x - p.eta);
          if (std::abs(r - p.kappa) <= 2.0 * d) near_edge = true;
          if (r < p.kappa + 2.0 * d) bound += 24.0 * std::abs(p.xi) / (p.kappa * p.kappa * p.kappa);
        }
      if (near_edge || bound * d * d / 6.0 > 1e-7) continue;
      ++valid;
      const double fd = (env.potential(n, x + d) - env.potential(n, x - d)) / (2.0 * d);
      EXPECT_NEAR(env.force(n, x), fd, 1e-6) << "seed " << seed << " n " << n << " x " << x;
    }
    EXPECT_GE(valid, 950);
  }
}

TEST(Environment, ForceMatchesFiniteDifferenceFixedScale) {
  EnvironmentConfig cfg;
  cfg.master_seed = 8;
  cfg.kappa = {KappaDistribution::Kind::fixed, 0.75};
  const Environment env(cfg);
  const double d = 1e-5;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-100.0, 100.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = ux(rng);
    bool near_edge = false;
    const auto c = static_cast<std::int64_t>(std::floor(x));
    for (std::int64_t i = c - 2; i <= c + 2; ++i)
      for (const auto& p : env.cell_points(0, i))
        if (std::abs(std::abs(x - p.eta) - p.kappa) <= 2.0 * d) near_edge = true;
    if (near_edge) continue;
    const double fd = (env.potential(0, x + d) - env.potential(0, x - d)) / (2.0 * d);
    EXPECT_NEAR(env.force(0, x), fd, 1e-6);
  }
}

TEST(Environment, PotentialMatchesPointListOracle) {
  const auto env = random_env(17, 3.0);
  std::vector<KickPoint> pts;
  for (std::int64_t i = -10; i <= 10; ++i)
    for (const auto& p : env.cell_points(4, i)) pts.push_back(p);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(-8.0, 8.0);
  for (int k = 0; k < 500; ++k) {
    const double x = ux(rng);
    EXPECT_NEAR(env.potential(4, x), oracle_potential(pts, x), 1e-14);
  }
}

TEST(Environment, PotentialMaxBoundsSamples) {
  const auto env = random_env(21, 2.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int n = 0; n < 10; ++n) {
    const double x = -5.0 + 1.3 * n;
    const double m = env.potential_max(n, x);
    for (int k = 0; k < 100; ++k) EXPECT_GE(m, std::abs(env.potential(n, x + u01(rng))));
  }
}

TEST(Environment, PotentialMaxFindsInteriorPeakOfOverlap) {
  // Two overlapping positive bumps: the max is strictly between the centers.
  const auto env = Environment::from_points({{0, 0.3, 1.0, 0.5}, {0, 0.6, 1.0, 0.5}});
  const double m = env.potential_max(0, 0.0);
  double fine = 0.0;
  for (int k = 0; k <= 1000000; ++k) fine = std::max(fine, env.potential(0, k * 1e-6));
  EXPECT_GE(m, fine - 1e-12);
  EXPECT_GT(m, env.potential(0, 0.3));
}

TEST(Environment, Locality) {
  const auto env = random_env(31, 2.0);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ux(-30.0, 30.0);
  for (int k = 0; k < 200; ++k) {
    const double x = ux(rng);
    const auto c = static_cast<std::int64_t>(std::floor(x));
    std::vector<KickPoint> near;
    for (std::int64_t i = c - 1; i <= c + 1; ++i)
      for (const auto& p : env.cell_points(1, i)) near.push_back(p);
    const auto restricted = Environment::from_points(near);
    EXPECT_EQ(env.potential(1, x), restricted.potential(1, x));
  }
}

TEST(Environment, ShearIsExactRelabelingOnDyadics) {
  const auto env = random_env(77, 2.0);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> ui(-4096, 4096);
  std::uniform_int_distribution<int> un(-16, 16);
  const double a = 1.625, v = -0.375;
  const auto sh = env.sheared(a, v);
  for (int k = 0; k < 2000; ++k) {
    const double x = ui(rng) / 256.0;
    const int n = un(rng);
    EXPECT_EQ(sh.potential(n, x + a + v * n), env.potential(n, x));
  }
  const auto id = env.sheared(0.0, 0.0);
  for (int k = 0; k < 100; ++k) {
    const double x = ui(rng) / 100.0;
    EXPECT_EQ(id.potential(3, x), env.potential(3, x));
  }
}

TEST(Environment, ShearOnGeneralRealsWithinRounding) {
  const auto env = random_env(78, 2.0);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ux(-20.0, 20.0);
  const double a = std::sqrt(2.0), v = 1.0 / 3.0;
  const auto sh = env.sheared(a, v);
  for (int k = 0; k < 2000; ++k) {
    const double x = ux(rng);
    const int n = k % 9 - 4;
    EXPECT_NEAR(sh.potential(n, x + a + v * n), env.potential(n, x), 1e-9);
  }
}

TEST(Environment, ShiftsCompose) {
  const auto env = random_env(4);
  const auto round = env.shifted(1, 0.0).shifted(-1, 0.0);
  const auto two = env.shifted(2, 0.5).shifted(-1, 0.25);
  const auto one = env.shifted(1, 0.75);
  for (int k = 0; k < 200; ++k) {
    const double x = -10.0 + k * 0.1;
    EXPECT_EQ(round.potential(k % 5, x), env.potential(k % 5, x));
    EXPECT_EQ(two.potential(k % 5, x), one.potential(k % 5, x));
    EXPECT_EQ(env.shifted(3, 1.5).potential(k % 5, x), env.potential(k % 5 + 3, x + 1.5));
  }
}

TEST(Environment, SamplePotentialIsBitIdenticalToPointwise) {
  const auto env = random_env(6, 3.0).sheared(0.5, 0.25).shifted(2, -1.0);
  const GridSpec g{-7.0, 1.0 / 64.0, 900};
  for (std::int64_t n = -2; n <= 2; ++n) {
    const auto s = env.sample_potential(n, g);
    for (std::size_t i = 0; i < g.count; ++i) ASSERT_EQ(s[i], env.potential(n, g.x(i)));
  }
}

TEST(Environment, StationaryInSpace) {
  double s0 = 0, q0 = 0, s1 = 0, q1 = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const auto env = random_env(replica_seed(555, static_cast<std::uint64_t>(k)));
    const double a = env.potential(0, 0.0), b = env.potential(0, 17.3);
    s0 += a, q0 += a * a, s1 += b, q1 += b * b;
  }
  const double m0 = s0 / draws, m1 = s1 / draws;
  const double v0 = q0 / draws - m0 * m0, v1 = q1 / draws - m1 * m1;
  EXPECT_LE(std::abs(m0 - m1), 4.0 * std::sqrt((v0 + v1) / draws));
  // variance difference: SE of a sample variance is about sqrt(2/n) sigma^2, widened for kurtosis
  EXPECT_LE(std::abs(v0 - v1), 4.0 * std::sqrt(2.0 * (v0 * v0 + v1 * v1) * 3.0 / draws));
}

TEST(Environment, RejectsBadConfig) {
  EnvironmentConfig cfg;
  cfg.intensity = -1.0;
  EXPECT_THROW(Environment{cfg}, Error);
  EXPECT_THROW(Environment::from_points({{0, 0.0, 2.0, 1.0}}), Error);
  EXPECT_THROW(Environment::from_points({{0, 0.0, 1.0, 0.0}}), Error);
}
