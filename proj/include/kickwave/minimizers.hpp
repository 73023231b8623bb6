#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kickwave/action.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/grid.hpp"
#include "kickwave/hopf_lax.hpp"
#include "kickwave/initial_data.hpp"

namespace kickwave {

enum class TraceSource { point_to_point, linear_initial_v };

inline const char* to_string(TraceSource s) {
  return s == TraceSource::point_to_point ? "point_to_point" : "linear_initial_v";
}

struct MinimizerTrace {
  Path path;
  bool refined = false;
  double el_res = 0.0;
  TraceSource source = TraceSource::point_to_point;
  bool untrusted = false;  // the grid trace touched a node outside its trusted window
  int iterations = 0;
};

// Grid path ending at node i at time t (default: the stack's end time),
// followed back through the argmin maps to the stack's start time.
inline Path trace_back(const BackpointerStack& stack, std::size_t i, std::optional<std::int64_t> t_end = std::nullopt) {
  const std::int64_t t = t_end.value_or(stack.end_time());
  if (t < stack.start_time || t > stack.end_time()) throw Error("trace time outside the backpointer stack");
  if (i >= stack.grid.count) throw Error("trace index outside the grid");
  const auto len = static_cast<std::size_t>(t - stack.start_time) + 1;
  std::vector<double> x(len);
  std::size_t cur = i;
  for (std::size_t k = len; k-- > 0;) {
    x[k] = stack.grid.x(cur);
    if (k > 0) cur = stack.maps[k - 1][cur];
  }
  return Path(stack.start_time, std::move(x));
}

// True if every node visited by the backward trace lies in its time's trusted window.
inline bool trace_trusted(const BackpointerStack& stack, std::size_t i, std::optional<std::int64_t> t_end = std::nullopt) {
  const std::int64_t t = t_end.value_or(stack.end_time());
  std::size_t cur = i;
  for (std::int64_t s = t; s >= stack.start_time; --s) {
    if (!stack.trusted(s, cur)) return false;
    if (s > stack.start_time) cur = stack.map_into(s)[cur];
  }
  return true;
}

struct RefineOptions {
  double el_tol = 1e-8;
  int max_iter = 100;
  // Present: the start point is free and carries this initial potential.
  std::optional<InitialPotential> free_start;
};

namespace detail {

// Solves the symmetric tridiagonal system (diag, off) d = rhs in place;
// false if a pivot is not positive (matrix not positive definite).
inline bool solve_tridiagonal_spd(std::vector<double> diag, const std::vector<double>& off, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      const double m = off[k - 1] / diag[k - 1];
      diag[k] -= m * off[k - 1];
      rhs[k] -= m * rhs[k - 1];
    }
    if (!(diag[k] > 1e-12)) return false;
  }
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) rhs[k] -= off[k] * rhs[k + 1];
    rhs[k] /= diag[k];
  }
  return true;
}

inline double start_residual(const Environment& env, const Path& path, const ActionParams& params,
                             const InitialPotential& w) {
  const double g = w.slope(path.x[0]) + params.p * env.force(path.start_time, path.x[0]) - (path.x[1] - path.x[0]);
  return std::abs(g);
}

}  // namespace detail

// Stationarity residual of the refinement problem: interior Euler-Lagrange
// residual, plus the start condition when the start is free.
inline double stationarity_residual(const Environment& env, const Path& path, const ActionParams& params,
                                    const std::optional<InitialPotential>& free_start) {
  double r = el_residual(env, path);
  if (free_start && path.length() >= 2) r = std::max(r, detail::start_residual(env, path, params, *free_start));
  return r;
}

// Damped Newton descent on the total action over interior coordinates (and the
// start point if free). The end point stays fixed. Hessian is tridiagonal with
// diagonal 2 + F''; a Levenberg shift is added when it is not positive
// definite, and steps are halved until the action decreases (to rounding).
inline MinimizerTrace refine(const Environment& env, const Path& path, const ActionParams& params = {},
                             const RefineOptions& opt = {}) {
  params.validate();
  MinimizerTrace out;
  out.path = path;
  if (path.length() < 2) throw Error("degenerate path");
  const bool free = opt.free_start.has_value();
  const auto action = [&](const Path& g) { return total_action(env, g, params, opt.free_start); };

  Path& g = out.path;
  const std::size_t first = free ? 0 : 1;
  const std::size_t last = g.length() - 2;  // end point fixed
  double a_cur = action(g);
  out.el_res = stationarity_residual(env, g, params, opt.free_start);
  if (first > last) {
    out.refined = out.el_res <= opt.el_tol;
    return out;
  }
  const std::size_t m = last - first + 1;
  std::vector<double> grad(m), diag(m), off(m > 0 ? m - 1 : 0, -1.0);

  // Polish past el_tol: Newton converges quadratically, and a tight finish
  // makes refined paths reproducible across nearby starting guesses.
  const double target = std::min(opt.el_tol, 1e-12);
  for (int it = 0; it < opt.max_iter && out.el_res > target; ++it) {
    out.iterations = it + 1;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t k = first + j;
      const std::int64_t t = g.start_time + static_cast<std::int64_t>(k);
      if (k == 0) {
        const auto& w = *opt.free_start;
        grad[j] = w.slope(g.x[0]) + params.p * env.force(t, g.x[0]) - (g.x[1] - g.x[0]);
        diag[j] = 1.0 + w.curvature(g.x[0]) + params.p * env.force_derivative(t, g.x[0]);
      } else {
        grad[j] = 2.0 * g.x[k] - g.x[k - 1] - g.x[k + 1] + env.force(t, g.x[k]);
        diag[j] = 2.0 + env.force_derivative(t, g.x[k]);
      }
    }
    std::vector<double> step;
    double mu = 0.0;
    for (int shift = 0; shift < 60; ++shift) {
      std::vector<double> d = diag;
      for (double& v : d) v += mu;
      step.assign(grad.begin(), grad.end());
      if (detail::solve_tridiagonal_spd(std::move(d), off, step)) break;
      step.clear();
      mu = mu == 0.0 ? 1e-3 : 4.0 * mu;
    }
    if (step.empty()) break;

    double t_step = 1.0;
    bool moved = false;
    for (int halve = 0; halve < 60; ++halve) {
      Path trial = g;
      for (std::size_t j = 0; j < m; ++j) trial.x[first + j] -= t_step * step[j];
      const double a_new = action(trial);
      const double r_new = stationarity_residual(env, trial, params, opt.free_start);
      // Near a minimum the decrease is ~residual^2, below the rounding of the
      // action; such steps are taken when they shrink the residual.
      const double a_tol = 1e-12 * (1.0 + std::abs(a_cur));
      if (a_new < a_cur || (a_new <= a_cur + a_tol && r_new < out.el_res)) {
        g = std::move(trial);
        a_cur = a_new;
        out.el_res = r_new;
        moved = true;
        break;
      }
      t_step *= 0.5;
    }
    if (!moved) break;
  }
  out.refined = out.el_res <= opt.el_tol;
  return out;
}

// Backward minimizers of slope v (or from a fixed start point) for every grid
// endpoint of one environment: a single evolve from time m with backpointers.
class OneSidedField {
 public:
  struct Setup {
    TraceSource source = TraceSource::linear_initial_v;
    double v = 0.0;        // linear_initial_v: W(y) = v y at time m
    double start_x = 0.0;  // point_to_point: start node at time m
    ActionParams params;
  };

  OneSidedField(const Environment& env, std::int64_t m, std::int64_t n_end, const GridSpec& grid, Setup setup)
      : env_(env), setup_(setup), m_(m) {
    if (n_end <= m) throw Error("horizon must start before the endpoint time");
    setup_.params.validate();
    const GridProfile w0 = setup_.source == TraceSource::linear_initial_v
                               ? InitialPotential::linear(setup_.v).sample(grid, m)
                               : point_source(grid, setup_.start_x, m);
    EvolveOptions opt;
    opt.watch = WatchRegion::none();
    res_ = evolve(env_, w0, n_end, setup_.params, opt);
  }

  const EvolveResult& result() const { return res_; }
  const GridSpec& grid() const { return res_.stack.grid; }
  std::int64_t start_time() const { return m_; }
  std::int64_t end_time() const { return res_.stack.end_time(); }
  const Setup& setup() const { return setup_; }

  std::size_t node(double x) const {
    const auto i = grid().node_at(x);
    if (!i) throw Error("endpoint must sit on a grid node");
    return *i;
  }

  Path grid_path(std::int64_t t, std::size_t i) const { return trace_back(res_.stack, i, t); }

  MinimizerTrace trace(std::int64_t t, double x, bool do_refine = true, RefineOptions ro = {}) const {
    const std::size_t i = node(x);
    MinimizerTrace tr;
    tr.path = grid_path(t, i);
    tr.untrusted = !trace_trusted(res_.stack, i, t);
    if (setup_.source == TraceSource::linear_initial_v) ro.free_start = InitialPotential::linear(setup_.v);
    else ro.free_start.reset();
    if (do_refine && tr.path.length() >= 2) {
      auto r = refine(env_, tr.path, setup_.params, ro);
      r.untrusted = tr.untrusted;
      tr = std::move(r);
    } else {
      tr.el_res = tr.path.length() >= 3 ? stationarity_residual(env_, tr.path, setup_.params, ro.free_start) : 0.0;
    }
    tr.source = setup_.source;
    return tr;
  }

  // Grid velocity u_i = x_i - x_{bp(i)} at time t, with the trusted window of t.
  GridProfile velocity(std::int64_t t) const {
    const auto& map = res_.stack.map_into(t);
    std::vector<double> u(grid().count);
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] = (static_cast<double>(i) - static_cast<double>(map[i])) * grid().h;
    GridProfile out(grid(), t, std::move(u));
    std::tie(out.lo, out.hi) = res_.stack.windows[static_cast<std::size_t>(t - m_)];
    return out;
  }

 private:
  Environment env_;
  Setup setup_;
  std::int64_t m_;
  EvolveResult res_;
};

// Grid covering every backward path of slope v from [x_lo, x_hi] at time n down
// to time m, widened by `margin`, with a node at `anchor`.
inline GridSpec cone_grid(double anchor, double x_lo, double x_hi, double v, std::int64_t m, std::int64_t n,
                          double margin, double h) {
  const double back = v * static_cast<double>(n - m);
  const double lo = std::min(x_lo, x_lo - back) - margin;
  const double hi = std::max(x_hi, x_hi - back) + margin;
  return GridSpec::around(anchor, std::max(0.0, anchor - lo), std::max(0.0, hi - anchor), h);
}

struct OneSidedOptions {
  double h = 1.0 / 64.0;
  double margin = 0.0;  // 0: default of 4 per unit of horizon
  bool refine = true;
  RefineOptions refine_opts;
};

// Approximant of the backward minimizer with slope v through (n, x): evolve
// W(y) = v y from m to n, trace back from x, refine with a free start.
inline MinimizerTrace one_sided_approx(const Environment& env, std::int64_t n, double x, double v, std::int64_t m,
                                       const ActionParams& params = {}, const OneSidedOptions& opt = {}) {
  if (!(m < n)) throw Error("horizon start must precede the endpoint time");
  const double margin = opt.margin > 0.0 ? opt.margin : 4.0 * static_cast<double>(n - m);
  const GridSpec g = cone_grid(x, x, x, v, m, n, margin, opt.h);
  OneSidedField field(env, m, n, g, {TraceSource::linear_initial_v, v, 0.0, params});
  return field.trace(n, x, opt.refine, opt.refine_opts);
}

struct PointToPointOptions {
  double h = 1.0 / 64.0;
  double margin = 0.0;  // 0: default of 4 per unit of horizon
  bool refine = true;
  RefineOptions refine_opts;
  // search with cell-minimum kicks and seed refinement from the wells found
  bool resolve_wells = true;
  // also refine the runner-up routes: at each junction of the grid path, other
  // local-minimum predecessors within tie_margin of the best (grid error can
  // reorder routes that close)
  bool explore_ties = true;
  double tie_margin = 0.1;
  std::size_t ties_per_junction = 2;
};

// Interior points of a grid path moved to the lowest point of F in their
// cell (the endpoints stay). Seeds refinement inside sub-grid wells.
inline Path snap_to_wells(const Environment& env, Path path, double h) {
  for (std::size_t k = 1; k + 1 < path.length(); ++k)
    path.x[k] = env.lowest_near(path.start_time + static_cast<std::int64_t>(k), path.x[k], 0.5 * h).second;
  return path;
}

// Refines the grid path and, when it differs, its well-snapped copy; keeps the
// one of lower action. Both are actual paths, so the lower is the better bound
// even when its refinement stalled (wells with kappa near 1e-4 put a 1e-8
// stationarity residual below double resolution).
inline MinimizerTrace refine_best(const Environment& env, const Path& grid_path, const ActionParams& params,
                                  const RefineOptions& ro, bool try_wells, double h) {
  auto a = refine(env, grid_path, params, ro);
  if (!try_wells) return a;
  const Path snapped = snap_to_wells(env, grid_path, h);
  if (snapped.x == grid_path.x) return a;
  auto b = refine(env, snapped, params, ro);
  return total_action(env, b.path, params) < total_action(env, a.path, params) ? b : a;
}

struct PointToPointResult {
  MinimizerTrace trace;
  double grid_value = 0.0;  // optimum of the grid search (start node exact, last step off-grid);
                            // with resolve_wells a relaxation, not the action of a path
  double value = 0.0;       // action of the returned path
};

// Minimizer from (t0, x0) to (t1, x1). The grid is anchored at x0; x1 may be
// off-grid, in which case the last step is minimized over trusted nodes.
inline PointToPointResult point_to_point(const Environment& env, std::int64_t t0, double x0, std::int64_t t1, double x1,
                                         const ActionParams& params = {}, const PointToPointOptions& opt = {}) {
  if (!(t1 > t0)) throw Error("point-to-point needs t1 > t0");
  params.validate();
  PointToPointResult out;
  out.trace.source = TraceSource::point_to_point;
  if (t1 == t0 + 1) {
    out.trace.path = Path(t0, {x0, x1});
    out.trace.refined = true;
    out.grid_value = out.value = total_action(env, out.trace.path, params);
    return out;
  }
  const double margin = opt.margin > 0.0 ? opt.margin : 4.0 * static_cast<double>(t1 - t0);
  const GridSpec g =
      GridSpec::around(x0, std::max(0.0, x0 - x1) + margin, std::max(0.0, x1 - x0) + margin, opt.h);
  EvolveOptions eo;
  eo.watch = WatchRegion::none();
  eo.kicks = opt.resolve_wells ? KickSampling::cell_min : KickSampling::nodes;
  eo.keep_history = opt.refine && opt.explore_ties;
  const auto res = evolve(env, point_source(g, x0, t0), t1 - 1, params, eo);
  const KickedProfile kp(env, res.profile, params, eo.kicks);
  const auto last = endpoint_step(env, kp, x1, params);
  Path path = trace_back(res.stack, last.predecessor);
  const bool left_start = path.x.front() != g.x(*g.node_near(x0));
  path.x.front() = x0;
  path.x.push_back(x1);
  out.grid_value = last.value;
  out.trace.path = std::move(path);
  out.trace.untrusted = last.at_window_edge || !trace_trusted(res.stack, last.predecessor) || left_start;
  if (opt.refine) {
    auto ro = opt.refine_opts;
    ro.free_start.reset();
    const Path grid_path = out.trace.path;
    auto r = refine_best(env, grid_path, params, ro, opt.resolve_wells, opt.h);
    r.untrusted = out.trace.untrusted;
    double best = total_action(env, r.path, params);
    // junction at time s: the node of the grid path there and its predecessors at s - 1
    for (std::int64_t s = t0 + 2; opt.explore_ties && s <= t1; ++s) {
      const GridProfile& prev = res.at(s - 1);
      const double x = grid_path.at(s);
      std::vector<double> c = s == t1 ? kp.kicked : prev.values;
      if (s < t1 && params.p > 0.0) {
        const auto f = sample_kick(env, s - 1, g, eo.kicks);
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += params.p * f[j];
      }
      for (std::size_t j = 0; j < c.size(); ++j) c[j] += 0.5 * (x - g.x(j)) * (x - g.x(j));
      const double y_star = grid_path.at(s - 1);
      const auto j_star = *g.node_near(y_star);
      std::vector<std::pair<double, std::size_t>> alts;
      for (std::size_t j = std::max<std::size_t>(prev.lo, 1); j + 1 <= std::min(prev.hi, c.size() - 2); ++j)
        if (c[j] < c[j - 1] && c[j] <= c[j + 1] && c[j] <= c[j_star] + opt.tie_margin &&
            std::abs(g.x(j) - y_star) > 2.0 * opt.h)
          alts.emplace_back(c[j], j);
      std::sort(alts.begin(), alts.end());
      if (alts.size() > opt.ties_per_junction) alts.resize(opt.ties_per_junction);
      for (const auto& [cost, j] : alts) {
        Path alt = trace_back(res.stack, j, s - 1);
        alt.x.front() = x0;
        for (std::int64_t t = s; t <= t1; ++t) alt.x.push_back(grid_path.at(t));
        auto ra = refine_best(env, alt, params, ro, opt.resolve_wells, opt.h);
        const double a = total_action(env, ra.path, params);
        if (a < best) {
          best = a;
          ra.untrusted = out.trace.untrusted || !trace_trusted(res.stack, j, s - 1);
          r = std::move(ra);
        }
      }
    }
    r.source = TraceSource::point_to_point;
    out.trace = std::move(r);
  } else {
    out.trace.el_res = el_residual(env, out.trace.path);
  }
  out.value = total_action(env, out.trace.path, params);
  return out;
}

struct CrossingReport {
  bool coincide = false;
  int crossings = 0;  // strict sign changes of p1 - p2 on the common interior
  int touches = 0;    // interior times where |p1 - p2| <= tol
  std::optional<std::int64_t> first_crossing;
};

inline CrossingReport crossing_check(const Path& p1, const Path& p2, double tol = 0.0) {
  const std::int64_t a = std::max(p1.start_time, p2.start_time);
  const std::int64_t b = std::min(p1.end_time(), p2.end_time());
  CrossingReport r;
  if (b < a) return r;
  r.coincide = true;
  for (std::int64_t t = a; t <= b; ++t)
    if (std::abs(p1.at(t) - p2.at(t)) > tol) r.coincide = false;
  if (r.coincide) return r;
  int last_sign = 0;
  for (std::int64_t t = a + 1; t < b; ++t) {
    const double d = p1.at(t) - p2.at(t);
    if (std::abs(d) <= tol) {
      ++r.touches;
      continue;
    }
    const int s = d > 0.0 ? 1 : -1;
    if (last_sign != 0 && s != last_sign) {
      ++r.crossings;
      if (!r.first_crossing) r.first_crossing = t;
    }
    last_sign = s;
  }
  return r;
}

// Cone around the ray from a path's start (time 0 of the cone) towards (n, x)
// relative to it: fixed half-width eta, or eta(k) = Q k^-delta.
struct ConeSpec {
  std::int64_t n = 1;
  double x = 0.0;
  std::optional<double> eta;
  double Q = 1.0;
  double delta = 0.2;

  void validate() const {
    if (n <= 0) throw Error("cone apex time must be positive");
    if (eta) {
      if (!(*eta > 0.0)) throw Error("cone half-width must be positive");
    } else if (!(delta > 0.0 && delta < 0.25) || !(Q > 0.0)) {
      throw Error("cone needs Q > 0 and 0 < delta < 1/4");
    }
  }
  double width(std::int64_t k) const { return eta ? *eta : Q * std::pow(static_cast<double>(k), -delta); }
};

struct StraightnessReport {
  bool inside = true;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::optional<std::int64_t> first_exit;  // smallest k with a violation
};

// max over k >= k_min of |(gamma_k - gamma_0)/k - x/n| - eta(k).
inline StraightnessReport straightness_check(const Path& path, const ConeSpec& cone, std::int64_t k_min = 1) {
  cone.validate();
  StraightnessReport r;
  const double slope = cone.x / static_cast<double>(cone.n);
  for (std::size_t j = static_cast<std::size_t>(std::max<std::int64_t>(1, k_min)); j < path.length(); ++j) {
    const auto k = static_cast<std::int64_t>(j);
    const double viol = std::abs((path.x[j] - path.x[0]) / static_cast<double>(k) - slope) - cone.width(k);
    r.worst_violation = std::max(r.worst_violation, viol);
    if (viol > 0.0) {
      r.inside = false;
      if (!r.first_exit) r.first_exit = k;
    }
  }
  return r;
}

// W_k = sum_{i=0}^{2} (upper_{k-i} - lower_{k-i}) for every k with k-2..k in
// the common support. Gaps below -tol are rejected; smaller ones count as 0.
inline std::vector<std::pair<std::int64_t, double>> width_Wk(const Path& lower, const Path& upper, double tol = 0.0) {
  const std::int64_t a = std::max(lower.start_time, upper.start_time);
  const std::int64_t b = std::min(lower.end_time(), upper.end_time());
  std::vector<std::pair<std::int64_t, double>> out;
  for (std::int64_t t = a; t <= b; ++t)
    if (upper.at(t) < lower.at(t) - tol) throw Error("width needs ordered paths (lower <= upper)");
  for (std::int64_t k = a + 2; k <= b; ++k) {
    double w = 0.0;
    for (int i = 0; i < 3; ++i) w += std::max(0.0, upper.at(k - i) - lower.at(k - i));
    out.emplace_back(k, w);
  }
  return out;
}

// Times k < n with W_k < c / (n - k), in descending order.
inline std::vector<std::int64_t> pairing_times(const Path& lower, const Path& upper, std::int64_t n, double c = 1.0,
                                               double tol = 0.0) {
  std::vector<std::int64_t> out;
  for (const auto& [k, w] : width_Wk(lower, upper, tol))
    if (k < n && w < c / static_cast<double>(n - k)) out.push_back(k);
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace kickwave
