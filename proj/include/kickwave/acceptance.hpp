#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kickwave/attraction.hpp"
#include "kickwave/busemann.hpp"
#include "kickwave/experiments.hpp"
#include "kickwave/hopf_lax.hpp"
#include "kickwave/minimizers.hpp"
#include "kickwave/parallel.hpp"
#include "kickwave/rng.hpp"
#include "kickwave/shape.hpp"
#include "kickwave/stats.hpp"

// The acceptance battery: thirteen criteria at full scale, each checked against
// an independent oracle or a statistical bound. Runtime limits are part of the
// criterion where one is stated.
namespace kickwave::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  std::uint64_t master_seed = 20261019;
  unsigned workers = default_workers();
};

namespace detail {

inline double uniform(CellStream& s, double a, double b) { return a + (b - a) * s.uniform(); }

inline Environment forced(std::uint64_t seed, double intensity = 1.0) {
  EnvironmentConfig ec;
  ec.master_seed = seed;
  ec.intensity = intensity;
  return Environment(ec);
}

inline double median(std::vector<double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
  std::nth_element(x.begin(), mid, x.end());
  if (x.size() % 2) return *mid;
  return 0.5 * (*mid + *std::max_element(x.begin(), mid));
}

// O(N^2) scan, rightmost argmin on ties.
inline EnvelopeResult naive_envelope(const std::vector<double>& v, const GridSpec& g) {
  EnvelopeResult r;
  r.values.assign(v.size(), 0.0);
  r.argmin.assign(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double d = g.x(i) - g.x(j);
      const double c = v[j] + 0.5 * d * d;
      if (c <= best) best = c, r.argmin[i] = static_cast<Index>(j);
    }
    r.values[i] = best;
  }
  return r;
}

// Best action over every grid path y_0..y_steps, per endpoint node.
inline std::vector<double> enumerate_paths(const Environment& env, const GridProfile& w, int steps, double p) {
  const GridSpec& g = w.grid;
  std::vector<std::vector<double>> f(static_cast<std::size_t>(steps) + 1, std::vector<double>(g.count));
  for (int k = 0; k <= steps; ++k)
    for (std::size_t i = 0; i < g.count; ++i) f[k][i] = env.potential(w.time + k, g.x(i));
  std::vector<double> best(g.count, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> idx(static_cast<std::size_t>(steps) + 1, 0);
  for (;;) {
    double a = w.values[idx[0]];
    for (int k = 0; k < steps; ++k) {
      const double d = g.x(idx[k + 1]) - g.x(idx[k]);
      a += 0.5 * d * d + p * f[k][idx[k]] + (1.0 - p) * f[k + 1][idx[k + 1]];
    }
    best[idx.back()] = std::min(best[idx.back()], a);
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == g.count) idx[d++] = 0;
    if (d == idx.size()) break;
  }
  return best;
}

// Termwise action of a grid path started from profile w.
inline double grid_path_action(const Environment& env, const GridProfile& w, const Path& path, double p) {
  double a = w.values[*w.grid.node_at(path.x[0])];
  for (std::size_t k = 0; k + 1 < path.length(); ++k) {
    const auto t = path.start_time + static_cast<std::int64_t>(k);
    const double d = path.x[k + 1] - path.x[k];
    a += 0.5 * d * d + p * env.potential(t, path.x[k]) + (1.0 - p) * env.potential(t + 1, path.x[k + 1]);
  }
  return a;
}

// "key=value, key=value" with 4 significant digits.
class Detail {
 public:
  Detail() { os_.precision(4); }
  template <typename T>
  Detail& operator()(const char* key, const T& value) {
    if (!first_) os_ << ", ";
    os_ << key << "=" << value;
    first_ = false;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
  bool first_ = true;
};

}  // namespace detail

inline CriterionResult c01_envelope(const Options& o) {
  const GridSpec g{-32.0, 1.0 / 64.0, 4096};
  CellStream rng(o.master_seed, 1, 0);
  double worst_rel = 0.0;
  std::size_t monotone_breaks = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(g.count);
    const int kind = t % 4;
    const double a = detail::uniform(rng, -1, 1), b = detail::uniform(rng, -3, 3);
    for (std::size_t i = 0; i < g.count; ++i) {
      const double x = g.x(i);
      switch (kind) {
        case 0: v[i] = detail::uniform(rng, -10, 10); break;
        case 1: v[i] = a * x + std::sin(b * x) + 0.1 * rng.uniform(); break;
        case 2: v[i] = 0.25 * std::floor(detail::uniform(rng, -4, 4)); break;  // many exact ties
        default: v[i] = -0.3 * x * x + a * std::abs(x); break;
      }
    }
    const auto fast = quadratic_envelope(v, g);
    const auto slow = detail::naive_envelope(v, g);
    for (std::size_t i = 0; i < g.count; ++i) {
      worst_rel = std::max(worst_rel, std::abs(fast.values[i] - slow.values[i]) / std::max(1.0, std::abs(slow.values[i])));
      if (i > 0 && fast.argmin[i - 1] > fast.argmin[i]) ++monotone_breaks;
    }
  }
  CriterionResult r{1, "envelope oracle", worst_rel <= 1e-12 && monotone_breaks == 0, {}, 0.0};
  r.detail = detail::Detail()("inputs", 200)("N", g.count)("max_rel_err", worst_rel)("argmin_breaks", monotone_breaks).str();
  return r;
}

inline CriterionResult c02_enumeration(const Options& o) {
  const GridSpec g{-1.75, 0.25, 15};
  double worst_value = 0.0, worst_trace = 0.0;
  std::size_t endpoint_mismatch = 0;
  for (std::uint64_t e = 0; e < 50; ++e) {
    const auto env = detail::forced(replica_seed(o.master_seed + 2, e), 4.0);
    CellStream rng(o.master_seed, 2, static_cast<std::int64_t>(e));
    std::vector<double> w0(g.count);
    for (double& x : w0) x = detail::uniform(rng, -1, 1);
    const GridProfile w(g, static_cast<std::int64_t>(e % 5) - 2, w0);
    const double p = std::array{1.0, 0.5, 0.0}[e % 3];
    for (int steps = 1; steps <= 4; ++steps) {
      const auto res = evolve(env, w, w.time + steps, {p}, {WatchRegion::none()});
      const auto best = detail::enumerate_paths(env, w, steps, p);
      for (std::size_t i = 0; i < g.count; ++i) {
        const double scale = std::max(1.0, std::abs(best[i]));
        worst_value = std::max(worst_value, std::abs(res.profile.values[i] - best[i]) / scale);
        const auto path = trace_back(res.stack, i);
        endpoint_mismatch += path.x.back() != g.x(i) || path.length() != static_cast<std::size_t>(steps) + 1;
        worst_trace = std::max(worst_trace, std::abs(detail::grid_path_action(env, w, path, p) - best[i]) / scale);
      }
    }
  }
  CriterionResult r{2, "exhaustive-path oracle", worst_value <= 1e-12 && worst_trace <= 1e-12 && endpoint_mismatch == 0,
                    {}, 0.0};
  r.detail = detail::Detail()("envs", 50)("nodes", g.count)("max_steps", 4)("max_value_err", worst_value)(
                 "max_trace_err", worst_trace)("endpoint_mismatch", endpoint_mismatch)
                 .str();
  return r;
}

inline CriterionResult c03_zero_forcing(const Options& o) {
  const double h = 1.0 / 64;
  const auto zero = Environment::zero();
  // one step of 1/2 x^2; interior = |x| <= half the grid half-width
  const auto g = GridSpec::around(0.0, 8.0, 8.0, h);
  const auto step = evolve_one(zero, InitialPotential::quadratic(1.0).sample(g, 0));
  double quad_err = 0.0;
  for (std::size_t i = 0; i < g.count; ++i)
    if (std::abs(g.x(i)) <= 4.0) quad_err = std::max(quad_err, std::abs(step.next.values[i] - 0.25 * g.x(i) * g.x(i)));
  const bool quad_ok = quad_err <= 1.0 * h * h;

  ShapeStudyConfig sc;
  sc.env.master_seed = o.master_seed;
  sc.env.intensity = 0.0;
  sc.vs = {0.0, 0.5, 1.0, -0.75};
  sc.n = 16;
  sc.replicas = 4;
  sc.grid = {h, 1.0};
  const auto st = shape_study(sc, 1);
  double alpha_err = 0.0;
  for (const auto& e : st.estimates) alpha_err = std::max(alpha_err, std::abs(e.mean - 0.5 * e.v * e.v));
  // roundoff of the refined straight line only
  const bool alpha_ok = alpha_err <= 1e-12;

  double u_err = 0.0;
  std::size_t u_nodes = 0;
  GlobalSolutionOptions go;
  go.horizon = 32;
  go.margin = 16.0;
  for (double v : {0.0, 0.5, -0.25}) {
    const GlobalSolution gs(zero, v, 0, 1, -2.0, 2.0, go);
    for (std::int64_t n : {0, 1}) {
      const auto u = gs.velocity(n);
      for (std::size_t i = u.lo; !u.trusted_empty() && i <= u.hi; ++i, ++u_nodes)
        u_err = std::max(u_err, std::abs(u.values[i] - v));
    }
  }
  const bool u_ok = u_err == 0.0 && u_nodes > 0;
  CriterionResult r{3, "zero-forcing analytics", quad_ok && alpha_ok && u_ok, {}, 0.0};
  r.detail = detail::Detail()("quarter_square_err", quad_err)("bound_h2", h * h)("alpha_err", alpha_err)(
                 "u_v_err", u_err)("u_v_nodes", u_nodes)
                 .str();
  return r;
}

inline CriterionResult c04_shear(const Options& o) {
  std::size_t mismatches = 0, queries = 0;
  for (std::int64_t e = 0; e < 20; ++e) {
    const auto env = detail::forced(replica_seed(o.master_seed + 4, static_cast<std::uint64_t>(e)), 2.0);
    CellStream rng(o.master_seed, 4, e);
    const double a = std::floor(detail::uniform(rng, -512, 512)) / 256.0;
    const double w = std::floor(detail::uniform(rng, -256, 256)) / 256.0;
    const auto sh = env.sheared(a, w);
    for (int k = 0; k < 200; ++k, ++queries) {
      const double x = std::floor(detail::uniform(rng, -4096, 4096)) / 256.0;
      const auto n = static_cast<std::int64_t>(std::floor(detail::uniform(rng, -16, 17)));
      mismatches += sh.potential(n, x + a + w * static_cast<double>(n)) != env.potential(n, x);
    }
  }
  // action identity on general reals
  const auto rows = parallel_map(20, o.workers, [&](std::size_t k) {
    CellStream rng(o.master_seed, 5, static_cast<std::int64_t>(k));
    const auto env = detail::forced(replica_seed(o.master_seed + 5, k));
    const double a = detail::uniform(rng, -2, 2), w = detail::uniform(rng, -1, 1), x1 = detail::uniform(rng, -2, 2);
    return shear_action_identity(env, 64, 0.0, x1, a, w, {}, {1.0 / 64, 0.0, true, {}});
  });
  double worst = 0.0;
  std::size_t untrusted = 0;
  for (const auto& s : rows) {
    worst = std::max(worst, std::abs(s.lhs - s.rhs));
    untrusted += s.untrusted;
  }
  CriterionResult r{4, "shear identities", mismatches == 0 && worst <= 1e-6 && untrusted == 0, {}, 0.0};
  r.detail = detail::Detail()("dyadic_queries", queries)("bit_mismatches", mismatches)("pairs", 20)("n", 64)(
                 "max_action_err", worst)("untrusted", untrusted)
                 .str();
  return r;
}

inline CriterionResult c05_shape(const Options& o) {
  ShapeStudyConfig sc;
  sc.env.master_seed = o.master_seed + 5;
  sc.vs = {0.0, 0.5, 1.0};
  sc.ps = {0.0, 1.0};
  sc.n = 128;
  sc.replicas = 200;
  sc.grid = {1.0 / 64, 4.0};
  const auto st = shape_study(sc, o.workers);
  detail::Detail d;
  bool pass = true;
  std::size_t untrusted = 0;
  for (double p : sc.ps) {
    std::vector<ShapeEstimate> ests;
    for (double v : sc.vs) ests.push_back(st.at(p, v));
    for (const auto& e : ests) untrusted += e.untrusted;
    const auto q = quadratic_law_check(ests, sc.grid.h, 1.0);
    pass = pass && q.pass;
    for (const auto& row : q.rows) {
      const std::string key = "p" + std::to_string(static_cast<int>(p)) + "_v" + std::to_string(row.v).substr(0, 3);
      d((key + "_resid").c_str(), row.residual)((key + "_tol").c_str(), row.tolerance);
    }
  }
  for (double v : sc.vs) {
    const auto pi = p_independence_check(st.at(0.0, v), st.at(1.0, v));
    const bool ok = std::abs(pi.difference) <= 3.0 * pi.joint_se;
    pass = pass && ok;
    const std::string key = "v" + std::to_string(v).substr(0, 3);
    d((key + "_p0_minus_p1").c_str(), pi.difference)((key + "_joint_se").c_str(), pi.joint_se)(
        (key + "_paired_se").c_str(), pi.paired_se);
  }
  d("alpha0", st.at(1.0, 0.0).mean)("untrusted", untrusted);
  return {5, "quadratic shape law", pass && untrusted == 0, d.str(), 0.0};
}

inline CriterionResult c06_cocycle(const Options& o) {
  const double h = 1.0 / 64;
  struct Run {
    double split_err = 0.0;
    double slope_err = 0.0;
    bool boundary = false;
  };
  const auto runs = parallel_map(50, o.workers, [&](std::size_t k) {
    CellStream rng(o.master_seed, 6, static_cast<std::int64_t>(k));
    const auto env = detail::forced(replica_seed(o.master_seed + 6, k));
    const double vm = detail::uniform(rng, -1, 1), vp = detail::uniform(rng, -1, 1);
    const double p = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const auto mid = static_cast<std::int64_t>(1 + std::floor(31.0 * rng.uniform()));
    // probe margin: the outer 10% must average out the forced fluctuations of
    // W - v x, whose probe error decays roughly like width^-1.4
    const auto g = GridSpec::around(0.0, 2048.0, 2048.0, h);
    const auto w = InitialPotential::two_slope(vm, vp).sample(g, 0);
    const auto whole = evolve(env, w, 32, {p});
    const auto a = evolve(env, w, mid, {p}, {WatchRegion::none()});
    const auto b = evolve(env, a.profile, 32, {p}, {WatchRegion::none()});
    Run run;
    for (std::size_t i = 0; i < g.count; ++i)
      run.split_err = std::max(run.split_err, std::abs(whole.profile.values[i] - b.profile.values[i]));
    run.boundary = whole.boundary_contact;
    const auto probe = slope_probe(whole.profile);
    run.slope_err = std::max(std::abs(probe.v_minus - vm), std::abs(probe.v_plus - vp));
    return run;
  });
  double split = 0.0, slope = 0.0;
  std::size_t flagged = 0;
  for (const auto& r : runs) {
    split = std::max(split, r.split_err);
    if (r.boundary) ++flagged;
    else slope = std::max(slope, r.slope_err);
  }
  const double tol = 2.0 * h + 1e-3;
  CriterionResult r{6, "cocycle and invariance", split <= 1e-10 && slope <= tol && flagged < runs.size(), {}, 0.0};
  r.detail = detail::Detail()("runs", runs.size())("horizon", 32)("max_split_err", split)("max_slope_err", slope)(
                 "slope_tol", tol)("boundary_flagged", flagged)
                 .str();
  return r;
}

inline CriterionResult c07_minimizers(const Options& o) {
  const double h = 1.0 / 64;
  const std::vector<double> ends{-2.0, -1.0, -0.5, 0.0, 0.75, 2.0};
  struct Seed {
    std::size_t traces = 0, el_ok = 0, order_violations = 0, crossings = 0, pairs = 0;
  };
  const auto seeds = parallel_map(100, o.workers, [&](std::size_t s) {
    const auto env = detail::forced(replica_seed(o.master_seed + 7, s));
    Seed out;
    auto ordered = [&](const std::vector<Path>& tr) {
      for (std::size_t j = 1; j < tr.size(); ++j)
        for (std::size_t k = 0; k < tr[j].length(); ++k) out.order_violations += tr[j - 1].x[k] > tr[j].x[k] + 1e-9;
    };
    // backward minimizers of slope 0: ordered endpoints, free start
    {
      const OneSidedField field(env, -32, 0, cone_grid(0.0, -2.0, 2.0, 0.0, -32, 0, 40.0, h), {});
      std::vector<Path> tr;
      for (double x : ends) {
        const auto t = field.trace(0, x);
        ++out.traces;
        out.el_ok += t.refined && t.el_res <= 1e-8;
        tr.push_back(t.path);
      }
      ordered(tr);
    }
    // minimizers sharing the start point (-16, 0)
    {
      OneSidedField::Setup setup;
      setup.source = TraceSource::point_to_point;
      const OneSidedField field(env, -16, 0, GridSpec::around(0.0, 40.0, 40.0, h), setup);
      std::vector<Path> tr;
      for (double x : ends) {
        const auto t = field.trace(0, x);
        ++out.traces;
        out.el_ok += t.refined && t.el_res <= 1e-8;
        tr.push_back(t.path);
      }
      ordered(tr);
      for (std::size_t i = 0; i < tr.size(); ++i)
        for (std::size_t j = i + 1; j < tr.size(); ++j) {
          const auto c = crossing_check(tr[i], tr[j], 1e-9);
          if (c.coincide) continue;
          ++out.pairs;
          out.crossings += static_cast<std::size_t>(c.crossings);
        }
    }
    return out;
  });
  Seed tot;
  for (const auto& s : seeds) {
    tot.traces += s.traces, tot.el_ok += s.el_ok, tot.order_violations += s.order_violations;
    tot.crossings += s.crossings, tot.pairs += s.pairs;
  }
  const double frac = static_cast<double>(tot.el_ok) / static_cast<double>(tot.traces);
  CriterionResult r{7, "minimizer properties", frac >= 0.99 && tot.order_violations == 0 && tot.crossings == 0, {}, 0.0};
  r.detail = detail::Detail()("seeds", 100)("traces", tot.traces)("el_ok_fraction", frac)(
                 "order_violations", tot.order_violations)("shared_endpoint_pairs", tot.pairs)("crossings", tot.crossings)
                 .str();
  return r;
}

inline CriterionResult c08_tails(const Options& o) {
  TailStudyConfig tc;
  tc.env.master_seed = o.master_seed + 8;
  tc.n = 256;
  tc.replicas = 500;
  tc.grid = {1.0 / 64, 4.0};
  const auto t = tail_study(tc, o.workers);
  auto negative = [](const TailCurve& c) { return c.fit && c.fit->slope < 0.0 && c.fit->ci_hi < 0.0; };
  detail::Detail d;
  d("n", tc.n)("replicas", tc.replicas)("alpha_hat", t.alpha_hat)("untrusted", t.untrusted);
  if (t.action_tail.fit)
    d("action_slope", t.action_tail.fit->slope)("action_ci_hi", t.action_tail.fit->ci_hi);
  if (t.excursion_tail.fit)
    d("excursion_slope", t.excursion_tail.fit->slope)("excursion_ci_hi", t.excursion_tail.fit->ci_hi);
  return {8, "concentration and excursion tails", negative(t.action_tail) && negative(t.excursion_tail), d.str(), 0.0};
}

inline CriterionResult c09_busemann(const Options& o) {
  const SpacePoint p1{0, 0.0}, p2{1, 0.25}, p3{2, -0.25};
  struct Seed {
    double antisym = 0.0, additivity = 0.0, bound_excess = -1e300;
    std::size_t unreliable = 0;
  };
  const auto seeds = parallel_map(50, o.workers, [&](std::size_t s) {
    const auto env = detail::forced(replica_seed(o.master_seed + 9, s));
    BusemannOptions bo;
    bo.horizon = 256;
    bo.h = 1.0 / 64;
    const auto field = busemann_field(env, {p1, p2, p3}, 0.0, bo);
    const auto b12 = busemann_from_field(env, field, p1, p2, bo.c, bo.refine);
    const auto b21 = busemann_from_field(env, field, p2, p1, bo.c, bo.refine);
    const auto b23 = busemann_from_field(env, field, p2, p3, bo.c, bo.refine);
    const auto b13 = busemann_from_field(env, field, p1, p3, bo.c, bo.refine);
    Seed out;
    out.antisym = std::abs(b12.value + b21.value);
    out.additivity = std::abs(b12.value + b23.value - b13.value);
    for (const auto* b : {&b12, &b23, &b13}) out.unreliable += !b->reliable || b->untrusted;
    const auto a12 = point_to_point(env, p1.n, p1.x, p2.n, p2.x);
    const auto a23 = point_to_point(env, p2.n, p2.x, p3.n, p3.x);
    const auto a13 = point_to_point(env, p1.n, p1.x, p3.n, p3.x);
    out.bound_excess = std::max({b12.value - a12.value, b23.value - a23.value, b13.value - a13.value});
    return out;
  });
  double anti = 0.0, add = 0.0, excess = -1e300;
  std::size_t unreliable = 0, add_fail = 0;
  for (const auto& s : seeds) {
    anti = std::max(anti, s.antisym);
    add = std::max(add, s.additivity);
    add_fail += s.additivity > 2e-2;
    excess = std::max(excess, s.bound_excess);
    unreliable += s.unreliable;
  }
  CriterionResult r{9, "Busemann algebra", anti <= 2e-2 && add <= 2e-2 && excess <= 1e-2, {}, 0.0};
  r.detail = detail::Detail()("seeds", 50)("horizon", 256)("max_antisym", anti)("max_additivity", add)(
                 "additivity_failures", add_fail)("max_B_minus_A", excess)("unpaired_estimates", unreliable)
                 .str();
  return r;
}

inline CriterionResult c10_global_solution(const Options& o) {
  const std::vector<double> vs{0.0, 0.5};
  const std::size_t n_seeds = 20;
  struct Task {
    double max_dev = 0.0;
    std::size_t min_compared = std::numeric_limits<std::size_t>::max();
    double increment = 0.0;
  };
  const auto tasks = parallel_map(vs.size() * n_seeds, o.workers, [&](std::size_t k) {
    const double v = vs[k / n_seeds];
    const auto env = detail::forced(replica_seed(o.master_seed + 10, k % n_seeds));
    GlobalSolutionOptions go;
    go.horizon = 256;
    go.margin = 160.0;
    // U on [-8, 8]; the step is compared on [-4, 4], away from truncated predecessors
    const GlobalSolution gs(env, v, 0, 7, -8.0, 8.0, go);
    Task t;
    std::vector<GridProfile> us;
    for (std::int64_t n = 0; n <= 7; ++n) us.push_back(gs.potential(n));
    double inc = 0.0;
    for (std::size_t n = 0; n < us.size(); ++n) {
      const auto& u = us[n];
      if (!u.trusted_empty()) inc += (u.values[u.hi] - u.values[u.lo]) / (u.x(u.hi) - u.x(u.lo));
      if (n + 1 < us.size()) {
        const auto rep = fixed_point_deviation(env, u, us[n + 1], {}, std::pair{-4.0, 4.0});
        t.max_dev = std::max(t.max_dev, rep.max_deviation);
        t.min_compared = std::min(t.min_compared, rep.compared);
      }
    }
    t.increment = inc / static_cast<double>(us.size());
    return t;
  });
  detail::Detail d;
  bool pass = true;
  double dev = 0.0;
  std::size_t compared = std::numeric_limits<std::size_t>::max();
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    std::vector<double> inc;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const auto& t = tasks[vi * n_seeds + s];
      dev = std::max(dev, t.max_dev);
      compared = std::min(compared, t.min_compared);
      inc.push_back(t.increment);
    }
    const auto sm = summarize(inc);
    const bool ok = std::abs(sm.mean - vs[vi]) <= 3.0 * sm.se;
    pass = pass && ok;
    const std::string key = "v" + std::to_string(vs[vi]).substr(0, 3);
    d((key + "_mean_increment").c_str(), sm.mean)((key + "_se").c_str(), sm.se);
  }
  pass = pass && dev <= 1e-2 && compared > 0;
  d("seeds", n_seeds)("times", 8)("max_fixed_point_dev", dev)("min_nodes_compared", compared);
  return {10, "global-solution fixed point", pass, d.str(), 0.0};
}

inline CriterionResult c11_pullback(const Options& o) {
  const PullbackConfig cfg;
  const std::size_t n_seeds = 30;
  const auto rows = parallel_map(n_seeds, o.workers, [&](std::size_t s) {
    return pullback_experiment(detail::forced(replica_seed(o.master_seed + 11, s)), InitialPotential::zero(), cfg);
  });
  std::vector<double> med_d, med_slope;
  std::size_t boundary = 0;
  for (std::size_t k = 0; k < cfg.ms.size(); ++k) {
    std::vector<double> d, sl;
    for (const auto& r : rows) {
      d.push_back(r[k].d);
      sl.push_back(r[k].slope);
      boundary += r[k].boundary;
    }
    med_d.push_back(detail::median(d));
    med_slope.push_back(detail::median(sl));
  }
  bool monotone = true;
  for (std::size_t k = 1; k < med_d.size(); ++k) monotone = monotone && med_d[k] <= med_d[k - 1];
  const bool halved = med_d.back() <= 0.5 * med_d.front();
  const bool slope_ok = std::abs(med_slope.back()) <= 0.1;
  detail::Detail d;
  d("seeds", n_seeds);
  for (std::size_t k = 0; k < cfg.ms.size(); ++k)
    d(("median_d_m" + std::to_string(-cfg.ms[k])).c_str(), med_d[k]);
  d("median_slope_last", med_slope.back())("boundary_rows", boundary);
  return {11, "pullback attraction", monotone && halved && slope_ok, d.str(), 0.0};
}

inline CriterionResult c12_metric(const Options& o) {
  const GridSpec g = GridSpec::around(0.0, 12.0, 12.0, 1.0 / 16);
  double asym = 0.0, self = 0.0, tri = -1e300, min_pos = 1e300;
  for (std::int64_t t = 0; t < 100; ++t) {
    CellStream rng(o.master_seed, 12, t);
    const auto a = families::random_monotone(g, rng), b = families::random_monotone(g, rng),
               c = families::random_monotone(g, rng);
    const double ab = metric_d(a, b), bc = metric_d(b, c), ac = metric_d(a, c);
    asym = std::max(asym, std::abs(ab - metric_d(b, a)));
    self = std::max(self, metric_d(a, a));
    tri = std::max(tri, ac - ab - bc);
    min_pos = std::min(min_pos, ab);
  }
  const GridSpec fg = GridSpec::around(0.0, 8.0, 8.0, 1.0 / 64);
  const auto steps = convergence_equivalence_check(families::moving_steps(fg, 128), families::step(fg));
  const auto osc = convergence_equivalence_check(families::oscillating_heights(fg, 128), families::step(fg));
  const bool axioms = asym <= 1e-12 && self <= 1e-12 && tri <= 1e-12 && min_pos > 0.0;
  const bool fams = steps.d_converges && steps.consistent() && !osc.d_converges && osc.consistent();
  CriterionResult r{12, "metric module", axioms && fams, {}, 0.0};
  r.detail = detail::Detail()("triples", 100)("max_asym", asym)("max_self", self)("max_triangle_excess", tri)(
                 "min_distinct_d", min_pos)("steps_converge", steps.d_converges)(
                 "steps_pointwise", steps.pointwise_converges)("oscillating_converge", osc.d_converges)(
                 "oscillating_pointwise", osc.pointwise_converges)
                 .str();
  return r;
}

// Shape experiment at reduced scale; reproducibility does not depend on size.
inline CriterionResult c13_reproducibility(const Options& o) {
  RunConfig cfg;
  cfg.env.master_seed = o.master_seed + 13;
  cfg.kind = "shape";
  ShapeParams sp;
  sp.vs = {0.0, 0.5, 1.0};
  sp.ps = {0.0, 1.0};
  sp.n = 32;
  sp.replicas = 24;
  cfg.params = sp;
  std::vector<json> views;
  for (unsigned w : {1u, 2u, 8u}) views.push_back(make_manifest(cfg, run_experiment(cfg, w), w, 0.0).reproducible_view());
  const bool same = views[0] == views[1] && views[0] == views[2];
  CriterionResult r{13, "reproducibility", same && !views[0]["outputs"].empty(), {}, 0.0};
  r.detail = detail::Detail()("workers", "1/2/8")("outputs", views[0]["outputs"].size())(
                 "digest", views[0]["outputs"][0]["sha256"].get<std::string>().substr(0, 16))("identical", same)
                 .str();
  return r;
}

struct Criterion {
  int id;
  std::function<CriterionResult(const Options&)> run;
  double runtime_limit_s;  // infinity: no stated limit
};

inline const std::vector<Criterion>& criteria() {
  constexpr double none = std::numeric_limits<double>::infinity();
  static const std::vector<Criterion> all{
      {1, c01_envelope, 10.0},       {2, c02_enumeration, 30.0},      {3, c03_zero_forcing, 5.0},
      {4, c04_shear, 120.0},         {5, c05_shape, 1800.0},          {6, c06_cocycle, none},
      {7, c07_minimizers, none},     {8, c08_tails, 3600.0},          {9, c09_busemann, none},
      {10, c10_global_solution, none}, {11, c11_pullback, none},      {12, c12_metric, none},
      {13, c13_reproducibility, none},
  };
  return all;
}

inline CriterionResult run_criterion(const Criterion& c, const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = c.run(o);
  } catch (const std::exception& e) {
    r = {c.id, "criterion " + std::to_string(c.id), false, std::string("exception: ") + e.what(), 0.0};
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (std::isfinite(c.runtime_limit_s)) {
    std::ostringstream os;
    os << ", runtime_limit_s=" << c.runtime_limit_s;
    r.detail += os.str();
    r.pass = r.pass && r.seconds <= c.runtime_limit_s;
  }
  return r;
}

inline std::string format(const CriterionResult& r) {
  std::ostringstream os;
  os.precision(3);
  os << (r.pass ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << " (" << std::fixed << r.seconds << " s): "
     << r.detail;
  return os.str();
}

}  // namespace kickwave::acceptance
