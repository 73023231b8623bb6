#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kickwave/action.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/hopf_lax.hpp"
#include "kickwave/minimizers.hpp"
#include "kickwave/parallel.hpp"
#include "kickwave/rng.hpp"
#include "kickwave/stats.hpp"

namespace kickwave {

// Grid sizing for horizon T: half-width r_width * T beyond the span of the endpoints.
struct ShapeGrid {
  double h = 1.0 / 64.0;
  double r_width = 4.0;
  bool resolve_wells = true;  // see PointToPointOptions
};

// A^{0,n}(0, v n): optimal point-to-point action, refined.
inline PointToPointResult point_action(const Environment& env, std::int64_t n, double v, const ActionParams& params = {},
                                       const ShapeGrid& grid = {}) {
  PointToPointOptions opt;
  opt.h = grid.h;
  opt.margin = grid.r_width * static_cast<double>(n);
  opt.resolve_wells = grid.resolve_wells;
  return point_to_point(env, 0, 0.0, n, v * static_cast<double>(n), params, opt);
}

struct PointActionSample {
  double grid_value = 0.0;
  double value = 0.0;  // refined when refinement converged, else the grid value
  bool refined = false;
  bool untrusted = false;
  double excursion = 0.0;
};

// A^{0,t}(0, v t) for every v in vs and t in times, from one point-source
// evolve started at (0, 0). Every v t must be a grid node.
inline std::vector<std::vector<PointActionSample>> point_action_table(const Environment& env,
                                                                      const std::vector<double>& vs,
                                                                      const std::vector<std::int64_t>& times,
                                                                      const ActionParams& params = {},
                                                                      const ShapeGrid& grid = {},
                                                                      bool do_refine = true) {
  if (vs.empty() || times.empty()) throw Error("point-action table needs velocities and times");
  const std::int64_t T = *std::max_element(times.begin(), times.end());
  if (*std::min_element(times.begin(), times.end()) < 1) throw Error("point-action times must be positive");
  const double vmin = std::min(0.0, *std::min_element(vs.begin(), vs.end()));
  const double vmax = std::max(0.0, *std::max_element(vs.begin(), vs.end()));
  const double margin = grid.r_width * static_cast<double>(T);
  const GridSpec g = GridSpec::around(0.0, -vmin * static_cast<double>(T) + margin,
                                      vmax * static_cast<double>(T) + margin, grid.h);
  EvolveOptions eo;
  eo.watch = WatchRegion::none();
  eo.kicks = grid.resolve_wells ? KickSampling::cell_min : KickSampling::nodes;
  const auto res = evolve(env, point_source(g, 0.0, 0), T, params, eo);

  std::vector<std::vector<PointActionSample>> out(times.size(), std::vector<PointActionSample>(vs.size()));
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    const std::int64_t t = times[ti];
    for (std::size_t vi = 0; vi < vs.size(); ++vi) {
      const auto node = g.node_at(vs[vi] * static_cast<double>(t));
      if (!node) throw Error("endpoint v*t must sit on a grid node");
      PointActionSample& s = out[ti][vi];
      const Path path = trace_back(res.stack, *node, t);
      s.untrusted = !trace_trusted(res.stack, *node, t) || path.x.front() != 0.0;
      s.grid_value = total_action(env, path, params);
      s.value = s.grid_value;
      s.excursion = max_excursion(path);
      if (do_refine) {
        const auto r = refine_best(env, path, params, {}, grid.resolve_wells, grid.h);
        s.refined = r.refined;
        if (r.refined) {
          s.value = total_action(env, r.path, params);
          s.excursion = max_excursion(r.path);
        }
      }
    }
  }
  return out;
}

struct ShapeEstimate {
  double v = 0.0;
  std::int64_t n = 0;
  double p = 1.0;
  std::size_t replicas = 0;
  double mean = 0.0;
  double se = 0.0;
  std::vector<double> samples;  // A / n per replica, replica order
  std::size_t untrusted = 0;
  std::size_t unrefined = 0;
};

inline ShapeEstimate make_estimate(double v, std::int64_t n, double p, std::vector<double> samples) {
  if (samples.size() < 2) throw Error("a shape estimate needs at least two replicas");
  ShapeEstimate e;
  e.v = v;
  e.n = n;
  e.p = p;
  e.replicas = samples.size();
  const auto s = summarize(samples);
  e.mean = s.mean;
  e.se = s.se;
  e.samples = std::move(samples);
  return e;
}

// Means of A/t over t in {n/4, n/2, n}; the sequence is nonincreasing in
// expectation up to noise. richardson = 2 mean(n) - mean(n/2).
struct SubadditiveDiagnostic {
  double v = 0.0;
  double p = 1.0;
  std::vector<std::int64_t> times;
  std::vector<double> means;
  std::vector<double> ses;
  double richardson = 0.0;
};

struct ShapeStudyConfig {
  EnvironmentConfig env;  // master_seed is the study seed; replica r uses replica_seed(master_seed, r)
  std::vector<double> vs{0.0, 0.5, 1.0};
  std::vector<double> ps{1.0};
  std::int64_t n = 128;
  std::size_t replicas = 200;
  ShapeGrid grid;
  bool refine = true;
};

struct ShapeStudy {
  std::vector<ShapeEstimate> estimates;  // ordered by (p, v) as in the config
  std::vector<SubadditiveDiagnostic> diagnostics;
  std::vector<std::uint64_t> seeds;

  const ShapeEstimate& at(double p, double v) const {
    for (const auto& e : estimates)
      if (e.p == p && e.v == v) return e;
    throw Error("no shape estimate for that (p, v)");
  }
};

inline ShapeStudy shape_study(const ShapeStudyConfig& cfg, unsigned workers = 1) {
  if (cfg.n < 4 || cfg.n % 4 != 0) throw Error("shape horizon must be a positive multiple of 4");
  if (cfg.replicas < 2) throw Error("shape study needs at least two replicas");
  const std::vector<std::int64_t> times{cfg.n / 4, cfg.n / 2, cfg.n};
  ShapeStudy out;
  out.seeds.resize(cfg.replicas);
  for (std::size_t r = 0; r < cfg.replicas; ++r) out.seeds[r] = replica_seed(cfg.env.master_seed, r);

  const std::size_t np = cfg.ps.size();
  // task = (replica, p); same seeds for every p so the p-comparison is paired
  const auto tables = parallel_map(cfg.replicas * np, workers, [&](std::size_t task) {
    EnvironmentConfig ec = cfg.env;
    ec.master_seed = out.seeds[task / np];
    const Environment env(ec);
    return point_action_table(env, cfg.vs, times, {cfg.ps[task % np]}, cfg.grid, cfg.refine);
  });

  for (std::size_t pi = 0; pi < np; ++pi) {
    for (std::size_t vi = 0; vi < cfg.vs.size(); ++vi) {
      SubadditiveDiagnostic diag;
      diag.v = cfg.vs[vi];
      diag.p = cfg.ps[pi];
      diag.times = times;
      ShapeEstimate last;
      for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::vector<double> xs(cfg.replicas);
        std::size_t untrusted = 0, unrefined = 0;
        for (std::size_t r = 0; r < cfg.replicas; ++r) {
          const auto& s = tables[r * np + pi][ti][vi];
          xs[r] = s.value / static_cast<double>(times[ti]);
          untrusted += s.untrusted;
          unrefined += cfg.refine && !s.refined;
        }
        auto e = make_estimate(cfg.vs[vi], times[ti], cfg.ps[pi], std::move(xs));
        e.untrusted = untrusted;
        e.unrefined = unrefined;
        diag.means.push_back(e.mean);
        diag.ses.push_back(e.se);
        if (ti + 1 == times.size()) last = std::move(e);
      }
      diag.richardson = 2.0 * diag.means[2] - diag.means[1];
      out.diagnostics.push_back(std::move(diag));
      out.estimates.push_back(std::move(last));
    }
  }
  return out;
}

struct QuadraticLawRow {
  double v = 0.0;
  double residual = 0.0;  // alpha(v) - alpha(0) - v^2/2
  double tolerance = 0.0;  // 3 (se_v + se_0) + C h
  bool pass = false;
};

struct QuadraticLawReport {
  std::vector<QuadraticLawRow> rows;
  bool pass = true;
};

inline QuadraticLawReport quadratic_law_check(const std::vector<ShapeEstimate>& ests, double h, double C = 1.0) {
  const ShapeEstimate* zero = nullptr;
  for (const auto& e : ests)
    if (e.v == 0.0) zero = &e;
  if (!zero) throw Error("quadratic-law check needs an estimate at v = 0");
  QuadraticLawReport rep;
  for (const auto& e : ests) {
    if (e.p != zero->p) throw Error("quadratic-law check mixes different p");
    QuadraticLawRow row;
    row.v = e.v;
    row.residual = e.mean - zero->mean - 0.5 * e.v * e.v;
    row.tolerance = 3.0 * (e.se + zero->se) + C * h;
    row.pass = std::abs(row.residual) <= row.tolerance;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

struct PIndependenceReport {
  double v = 0.0;
  double difference = 0.0;  // mean(p = a) - mean(p = b)
  double paired_se = 0.0;   // stderr of per-replica differences (same seeds)
  double joint_se = 0.0;    // sqrt(se_a^2 + se_b^2)
  bool pass = false;        // |difference| <= 3 paired_se
};

inline PIndependenceReport p_independence_check(const ShapeEstimate& a, const ShapeEstimate& b) {
  if (a.v != b.v || a.n != b.n || a.samples.size() != b.samples.size())
    throw Error("p-independence check needs paired estimates");
  std::vector<double> d(a.samples.size());
  for (std::size_t r = 0; r < d.size(); ++r) d[r] = a.samples[r] - b.samples[r];
  const auto s = summarize(d);
  PIndependenceReport rep;
  rep.v = a.v;
  rep.difference = s.mean;
  rep.paired_se = s.se;
  rep.joint_se = std::sqrt(a.se * a.se + b.se * b.se);
  rep.pass = std::abs(rep.difference) <= 3.0 * rep.paired_se;
  return rep;
}

struct ShearIdentity {
  double lhs = 0.0;  // A_{L omega}(x0 + a, x1 + a + w n)
  double rhs = 0.0;  // A_omega(x0, x1) + (x1 - x0) w + n w^2 / 2
  bool untrusted = false;
  bool refined = false;
};

inline ShearIdentity shear_action_identity(const Environment& env, std::int64_t n, double x0, double x1, double a,
                                           double w, const ActionParams& params = {},
                                           const PointToPointOptions& opt = {}) {
  const auto base = point_to_point(env, 0, x0, n, x1, params, opt);
  const auto sheared = point_to_point(env.sheared(a, w), 0, x0 + a, n, x1 + a + w * static_cast<double>(n), params, opt);
  ShearIdentity out;
  out.lhs = sheared.value;
  out.rhs = base.value + (x1 - x0) * w + static_cast<double>(n) * w * w / 2.0;
  out.untrusted = base.trace.untrusted || sheared.trace.untrusted;
  out.refined = base.trace.refined && sheared.trace.refined;
  return out;
}

struct TailCurve {
  std::vector<double> u;
  std::vector<double> p_hat;
  std::string scale;             // abscissa of the fit
  std::optional<LinearFit> fit;  // log p_hat against the scaled abscissa
};

// Empirical exceedance P(x > u) on `points` equally spaced u in [0, max x),
// with the log-tail fit over points holding at least `min_count` exceedances.
inline TailCurve exceedance_curve(const std::vector<double>& x, std::size_t points, double scale,
                                  std::string scale_name, std::size_t min_count = 5, bool squared = false) {
  TailCurve c;
  c.scale = std::move(scale_name);
  if (x.empty() || points < 2) return c;
  const double top = *std::max_element(x.begin(), x.end());
  std::vector<double> fx, fy;
  for (std::size_t k = 0; k < points; ++k) {
    const double u = top * static_cast<double>(k) / static_cast<double>(points);
    std::size_t count = 0;
    for (double v : x) count += v > u;
    c.u.push_back(u);
    c.p_hat.push_back(static_cast<double>(count) / static_cast<double>(x.size()));
    if (count >= min_count) {
      fx.push_back((squared ? u * u : u) / scale);
      fy.push_back(std::log(c.p_hat.back()));
    }
  }
  if (fx.size() >= 3 && top > 0.0) c.fit = ols_fit(fx, fy);
  return c;
}

struct TailStudyConfig {
  EnvironmentConfig env;
  std::int64_t n = 256;
  std::size_t replicas = 500;
  double v = 0.0;
  ShapeGrid grid;
  std::size_t points = 24;
};

struct TailStudy {
  double alpha_hat = 0.0;
  std::vector<double> actions;     // A^{0,n}(0, v n) per replica
  std::vector<double> excursions;  // max excursion of the optimal path
  TailCurve action_tail;           // P(|A - alpha_hat n| > u), fit against u / (sqrt(n) ln n)
  TailCurve excursion_tail;        // P(excursion > u), fit against u^2 / n
  std::size_t untrusted = 0;
  std::vector<std::uint64_t> seeds;
};

inline TailStudy tail_study(const TailStudyConfig& cfg, unsigned workers = 1) {
  if (cfg.replicas < 3) throw Error("tail study needs at least three replicas");
  TailStudy out;
  out.seeds.resize(cfg.replicas);
  for (std::size_t r = 0; r < cfg.replicas; ++r) out.seeds[r] = replica_seed(cfg.env.master_seed, r);
  const auto samples = parallel_map(cfg.replicas, workers, [&](std::size_t r) {
    EnvironmentConfig ec = cfg.env;
    ec.master_seed = out.seeds[r];
    return point_action_table(Environment(ec), {cfg.v}, {cfg.n}, {}, cfg.grid)[0][0];
  });
  for (const auto& s : samples) {
    out.actions.push_back(s.value);
    out.excursions.push_back(s.excursion);
    out.untrusted += s.untrusted;
  }
  const auto n = static_cast<double>(cfg.n);
  out.alpha_hat = summarize(out.actions).mean / n;
  std::vector<double> dev(out.actions.size());
  for (std::size_t r = 0; r < dev.size(); ++r) dev[r] = std::abs(out.actions[r] - out.alpha_hat * n);
  out.action_tail = exceedance_curve(dev, cfg.points, std::sqrt(n) * std::log(n), "u/(sqrt(n) ln n)");
  out.excursion_tail = exceedance_curve(out.excursions, cfg.points, n, "u^2/n", 5, true);
  return out;
}

}  // namespace kickwave
