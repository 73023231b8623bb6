#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "kickwave/minimizers.hpp"

using namespace kickwave;

namespace {

Environment random_env(std::uint64_t seed, double intensity = 1.0) {
  EnvironmentConfig cfg;
  cfg.master_seed = seed;
  cfg.intensity = intensity;
  return Environment(cfg);
}

// Action of a grid path for the evolve problem: W(y0) plus per-step terms.
double grid_path_action(const Environment& env, const std::vector<double>& w0, const GridSpec& g, const Path& path,
                        double p) {
  double a = w0[*g.node_at(path.x[0])];
  for (std::size_t k = 0; k + 1 < path.length(); ++k) {
    const auto t = path.start_time + static_cast<std::int64_t>(k);
    const double d = path.x[k + 1] - path.x[k];
    a += 0.5 * d * d + p * env.potential(t, path.x[k]) + (1.0 - p) * env.potential(t + 1, path.x[k + 1]);
  }
  return a;
}

}  // namespace

TEST(TraceBack, ZeroEnvironmentIsConstant) {
  const auto g = GridSpec::around(0.0, 4.0, 4.0, 1.0 / 16);
  const auto res = evolve(Environment::zero(), InitialPotential::zero().sample(g, 0), 5);
  const auto p = trace_back(res.stack, 40);
  EXPECT_EQ(p.length(), 6u);
  for (double x : p.x) EXPECT_EQ(x, g.x(40));
}

TEST(TraceBack, PointSourceGivesStraightLine) {
  const auto g = GridSpec::around(0.0, 8.0, 8.0, 1.0 / 32);
  const auto res = evolve(Environment::zero(), point_source(g, 0.0, 0), 6);
  for (double x : {2.0, -3.5, 4.21875}) {
    const auto p = trace_back(res.stack, *g.node_at(x));
    EXPECT_EQ(p.x.front(), 0.0);
    EXPECT_EQ(p.x.back(), x);
    // equal-cost orderings of the grid steps tie, so only each step is pinned to a cell
    for (std::size_t k = 0; k + 1 < p.length(); ++k) EXPECT_LT(std::abs(p.x[k + 1] - p.x[k] - x / 6.0), g.h);
    const auto r = refine(Environment::zero(), p);
    for (std::size_t k = 0; k < p.length(); ++k) EXPECT_NEAR(r.path.x[k], x * k / 6.0, 1e-12);
  }
}

TEST(TraceBack, MatchesExhaustiveEnumeration) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto env = random_env(seed, 4.0);
    const GridSpec g{-1.75, 0.25, 15};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.5);
    std::vector<double> w0(g.count);
    for (double& x : w0) x = nd(rng);
    const int steps = 4;
    const double p = seed % 2 ? 1.0 : 0.25;
    const auto res = evolve(env, GridProfile(g, 0, w0), steps, {p});
    // brute force: best total over all 15^5 paths, per endpoint
    std::vector<double> best(g.count, std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> f(steps + 1, std::vector<double>(g.count));
    for (int k = 0; k <= steps; ++k)
      for (std::size_t i = 0; i < g.count; ++i) f[k][i] = env.potential(k, g.x(i));
    std::vector<std::size_t> idx(steps + 1, 0);
    for (;;) {
      double a = w0[idx[0]];
      for (int k = 0; k < steps; ++k) {
        const double d = g.x(idx[k + 1]) - g.x(idx[k]);
        a += 0.5 * d * d + p * f[k][idx[k]] + (1.0 - p) * f[k + 1][idx[k + 1]];
      }
      best[idx.back()] = std::min(best[idx.back()], a);
      std::size_t d = 0;
      while (d < idx.size() && ++idx[d] == g.count) idx[d++] = 0;
      if (d == idx.size()) break;
    }
    for (std::size_t i = 0; i < g.count; ++i) {
      const auto path = trace_back(res.stack, i);
      EXPECT_EQ(path.x.back(), g.x(i));
      const double a = grid_path_action(env, w0, g, path, p);
      EXPECT_NEAR(a, best[i], 1e-12 * (1.0 + std::abs(best[i])));
      EXPECT_NEAR(res.profile.values[i], best[i], 1e-12 * (1.0 + std::abs(best[i])));
    }
  }
}

TEST(Refine, StraightLineUnchanged) {
  const Path line(0, {0.0, 0.5, 1.0, 1.5, 2.0});
  const auto r = refine(Environment::zero(), line);
  EXPECT_TRUE(r.refined);
  EXPECT_EQ(r.el_res, 0.0);
  EXPECT_EQ(r.path.x, line.x);
}

TEST(Refine, SingleBumpThreePointCubic) {
  // path (0, y, 1) over times 0..2 with a dip -phi(y) at time 1 (kappa = 1):
  // stationarity 2y - 1 + 4y(1 - y^2) = 0, i.e. 4y^3 - 6y + 1 = 0.
  const auto env = Environment::from_points({{1, 0.0, -1.0, 1.0}});
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (4 * mid * mid * mid - 6 * mid + 1 > 0 ? lo : hi) = mid;
  }
  const auto r = refine(env, Path(0, {0.0, 0.25, 1.0}));
  EXPECT_TRUE(r.refined);
  EXPECT_NEAR(r.path.x[1], 0.5 * (lo + hi), 1e-9);
  EXPECT_EQ(r.path.x[0], 0.0);
  EXPECT_EQ(r.path.x[2], 1.0);
}

TEST(Refine, DescendsAndConvergesOnGridTraces) {
  int total = 0, converged = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto env = random_env(seed);
    const auto g = GridSpec::around(0.0, 40.0, 40.0, 1.0 / 64);
    const auto res = evolve(env, point_source(g, 0.0, 0), 16);
    for (double x : {-3.0, 0.0, 2.5}) {
      const auto path = trace_back(res.stack, *g.node_at(x));
      const auto r = refine(env, path);
      ++total;
      converged += r.refined;
      EXPECT_LE(total_action(env, r.path), total_action(env, path));
      EXPECT_EQ(r.path.x.front(), 0.0);
      EXPECT_EQ(r.path.x.back(), x);
      if (r.refined) {
        for (std::size_t k = 1; k + 1 < r.path.length(); ++k) {
          const auto t = static_cast<std::int64_t>(k);
          EXPECT_NEAR(el_step(env, t, r.path.x[k - 1], r.path.x[k]), r.path.x[k + 1], 1e-8);
        }
      }
    }
  }
  EXPECT_GE(converged, total * 99 / 100);
}

TEST(Refine, FreeStartSatisfiesTransversality) {
  const auto env = random_env(3);
  const auto w = InitialPotential::linear(0.5);
  const auto tr = one_sided_approx(env, 10, 0.0, 0.5, 0, {}, {1.0 / 64, 20.0, true, {}});
  EXPECT_TRUE(tr.refined);
  EXPECT_FALSE(tr.untrusted);
  const auto& x = tr.path.x;
  EXPECT_NEAR(0.5 + env.force(0, x[0]) - (x[1] - x[0]), 0.0, 1e-8);
  (void)w;
}

TEST(OneSided, ZeroEnvironmentLine) {
  for (double v : {0.0, 0.5, -0.75}) {
    const auto tr = one_sided_approx(Environment::zero(), 8, 1.0, v, -8, {}, {1.0 / 32, 8.0, true, {}});
    ASSERT_EQ(tr.path.length(), 17u);
    for (std::size_t k = 0; k < tr.path.length(); ++k)
      EXPECT_NEAR(tr.path.x[k], 1.0 - v * (16.0 - static_cast<double>(k)), 1e-12);
  }
}

TEST(OneSided, ShearEquivariance) {
  const double h = 1.0 / 64;
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    const auto env = random_env(seed);
    const double v = 0.25, w = 0.5;
    const std::int64_t n = 6, m = -10;
    const double x = 1.5;
    const auto sheared = env.sheared(0.0, w);
    const auto a = one_sided_approx(env, n, x, v, m, {}, {h, 20.0, true, {}});
    const auto b = one_sided_approx(sheared, n, x + w * n, v + w, m, {}, {h, 20.0, true, {}});
    ASSERT_EQ(a.path.length(), b.path.length());
    for (std::size_t k = 0; k < a.path.length(); ++k) {
      const double t = static_cast<double>(m) + static_cast<double>(k);
      EXPECT_NEAR(b.path.x[k], a.path.x[k] + w * t, 1e-9);
    }
    // unrefined grid traces map exactly
    const auto ag = one_sided_approx(env, n, x, v, m, {}, {h, 20.0, false, {}});
    const auto bg = one_sided_approx(sheared, n, x + w * n, v + w, m, {}, {h, 20.0, false, {}});
    for (std::size_t k = 0; k < ag.path.length(); ++k) {
      const double t = static_cast<double>(m) + static_cast<double>(k);
      EXPECT_EQ(bg.path.x[k], ag.path.x[k] + w * t);
    }
  }
}

TEST(OneSided, OrderedEndpointsGiveOrderedTraces) {
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto env = random_env(seed + 100);
    const auto g = cone_grid(0.0, -2.0, 2.0, 0.0, -32, 0, 40.0, 1.0 / 64);
    const OneSidedField field(env, -32, 0, g, {});
    std::vector<Path> traces;
    for (double x : {-2.0, -1.0, -0.5, 0.0, 0.75, 2.0}) traces.push_back(field.trace(0, x).path);
    for (std::size_t j = 1; j < traces.size(); ++j)
      for (std::size_t k = 0; k < traces[j].length(); ++k)
        if (traces[j - 1].x[k] > traces[j].x[k] + 1e-9) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(OneSided, HorizonDoublingSettles) {
  // successive differences of gamma_{n-1} shrink on most seeds
  int shrinking = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto env = random_env(seed + 300);
    std::vector<double> pos;
    for (std::int64_t m : {-8, -16, -32, -64}) {
      const auto tr = one_sided_approx(env, 0, 0.0, 0.0, m, {}, {1.0 / 64, 48.0, false, {}});
      pos.push_back(tr.path.x[tr.path.length() - 2]);
    }
    const double d1 = std::abs(pos[1] - pos[0]), d3 = std::abs(pos[3] - pos[2]);
    shrinking += d3 <= d1;
  }
  EXPECT_GE(shrinking, 7);
}

TEST(Crossing, Examples) {
  const Path a(0, {0.0, 1.0, 2.0, 3.0});
  EXPECT_TRUE(crossing_check(a, a).coincide);
  const Path b(0, {0.5, 1.5, 2.5, 3.5});
  const auto r = crossing_check(a, b);
  EXPECT_FALSE(r.coincide);
  EXPECT_EQ(r.crossings, 0);
  const Path c(0, {0.0, 2.0, 1.0, 3.0});
  const auto rc = crossing_check(Path(0, {0.0, 1.0, 2.0, 3.0}), c);
  EXPECT_EQ(rc.crossings, 1);
  EXPECT_EQ(*rc.first_crossing, 2);
}

TEST(Straightness, Examples) {
  const Path line(0, {0.0, 0.5, 1.0, 1.5, 2.0});
  const ConeSpec cone{4, 2.0, 0.1};
  const auto in = straightness_check(line, cone);
  EXPECT_TRUE(in.inside);
  EXPECT_LE(in.worst_violation, 0.0);
  // slope 1 against a cone of slope 0.5, half-width 0.1: outside from k = 1
  const Path steep(0, {0.0, 1.0, 2.0, 3.0, 4.0});
  const auto out = straightness_check(steep, cone);
  EXPECT_FALSE(out.inside);
  EXPECT_NEAR(out.worst_violation, 0.4, 1e-15);
  EXPECT_EQ(*out.first_exit, 1);
  // decaying cone Q k^-delta: a deviation of 0.3 per step leaves once Q k^-0.2 < 0.3
  ConeSpec shrink{1000, 0.0, std::nullopt, 1.0, 0.2};
  std::vector<double> xs(1001);
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = 0.3 * static_cast<double>(k);
  const auto s = straightness_check(Path(0, xs), shrink);
  EXPECT_EQ(*s.first_exit, static_cast<std::int64_t>(std::floor(std::pow(1.0 / 0.3, 5.0))) + 1);
  EXPECT_THROW(straightness_check(line, ConeSpec{4, 2.0, std::nullopt, 1.0, 0.3}), Error);
}

TEST(Width, Examples) {
  const Path a(0, {0.0, 1.0, 2.0, 3.0, 4.0});
  for (const auto& [k, w] : width_Wk(a, a)) EXPECT_EQ(w, 0.0);
  const Path b(0, {0.25, 1.25, 2.25, 3.25, 4.25});
  const auto ws = width_Wk(a, b);
  ASSERT_EQ(ws.size(), 3u);
  for (const auto& [k, w] : ws) EXPECT_EQ(w, 0.75);
  EXPECT_THROW(width_Wk(b, a), Error);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> lo(20), hi(20);
  for (std::size_t k = 0; k < 20; ++k) lo[k] = u(rng), hi[k] = lo[k] + u(rng);
  const auto rw = width_Wk(Path(3, lo), Path(3, hi));
  for (const auto& [k, w] : rw) {
    const auto j = static_cast<std::size_t>(k - 3);
    EXPECT_NEAR(w, (hi[j] - lo[j]) + (hi[j - 1] - lo[j - 1]) + (hi[j - 2] - lo[j - 2]), 1e-15);
  }
}

TEST(Pairing, Examples) {
  const Path a(0, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0});
  const auto all = pairing_times(a, a, 12);
  EXPECT_EQ(all, (std::vector<std::int64_t>{10, 9, 8, 7, 6, 5, 4, 3, 2}));
  // gap 1/16: W_k = 3/16 < 1/(12 - k) iff 12 - k < 16/3, i.e. k >= 7
  std::vector<double> up(a.x);
  for (double& x : up) x += 1.0 / 16.0;
  EXPECT_EQ(pairing_times(a, Path(0, up), 12), (std::vector<std::int64_t>{10, 9, 8, 7}));
}
