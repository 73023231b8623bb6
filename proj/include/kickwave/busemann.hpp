#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "kickwave/action.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/grid.hpp"
#include "kickwave/hopf_lax.hpp"
#include "kickwave/minimizers.hpp"

namespace kickwave {

struct SpacePoint {
  std::int64_t n = 0;
  double x = 0.0;
};

struct BusemannEstimate {
  SpacePoint p1, p2;
  double v = 0.0;
  double value = 0.0;
  std::vector<std::int64_t> pairing_ks;  // descending
  std::vector<double> residual_series;   // Delta_j at each pairing time, same order
  bool reliable = false;                 // false: no pairing time, fallback used
  bool untrusted = false;                // a trace left its trusted window
  double last_residual = 0.0;            // |Delta_last - Delta_previous|, 0 with one pairing
};

namespace detail {

// S[j] = action of the restriction of `path` to [start + j, end] (per-step
// weights p F(t) + (1 - p) F(t + 1)); S[len - 1] = 0.
inline std::vector<double> suffix_actions(const Environment& env, const Path& path, const ActionParams& params) {
  const std::size_t len = path.length();
  std::vector<double> s(len, 0.0);
  std::vector<double> f(len);
  for (std::size_t j = 0; j < len; ++j) f[j] = env.potential(path.start_time + static_cast<std::int64_t>(j), path.x[j]);
  for (std::size_t j = len - 1; j-- > 0;) {
    const double d = path.x[j + 1] - path.x[j];
    s[j] = s[j + 1] + 0.5 * d * d + params.p * f[j] + (1.0 - params.p) * f[j + 1];
  }
  return s;
}

struct TracedPoint {
  Path path;
  std::vector<double> suffix;
  bool untrusted = false;
};

inline TracedPoint trace_point(const Environment& env, const OneSidedField& field, SpacePoint p, bool refine_path,
                               const RefineOptions& ro) {
  TracedPoint tp;
  const auto tr = field.trace(p.n, p.x, refine_path, ro);
  tp.path = tr.path;
  tp.untrusted = tr.untrusted;
  tp.suffix = suffix_actions(env, tp.path, field.setup().params);
  return tp;
}

inline BusemannEstimate busemann_from_traces(const TracedPoint& a, const TracedPoint& b, SpacePoint p1, SpacePoint p2,
                                             double v, double c) {
  BusemannEstimate est;
  est.p1 = p1;
  est.p2 = p2;
  est.v = v;
  est.untrusted = a.untrusted || b.untrusted;
  const std::int64_t lo = std::max(a.path.start_time, b.path.start_time) + 1;  // k - 1 must be covered
  const std::int64_t n = std::min(a.path.end_time(), b.path.end_time());
  auto delta = [&](std::int64_t k) {
    const auto ja = static_cast<std::size_t>(k - 1 - a.path.start_time);
    const auto jb = static_cast<std::size_t>(k - 1 - b.path.start_time);
    // tilt term: the limit has slope v at time k - 1; vanishes once coalesced
    return b.suffix[jb] - a.suffix[ja] + v * (b.path.x[jb] - a.path.x[ja]);
  };
  double best_score = std::numeric_limits<double>::infinity();
  std::int64_t fallback = n;
  for (std::int64_t k = n; k >= lo + 2; --k) {
    double w = 0.0;
    for (int i = 0; i < 3; ++i) w += std::abs(a.path.at(k - i) - b.path.at(k - i));
    if (k < n && w < c / static_cast<double>(n - k)) {
      est.pairing_ks.push_back(k);
      est.residual_series.push_back(delta(k));
    }
    const double score = w * static_cast<double>(std::max<std::int64_t>(1, n - k));
    if (score <= best_score) best_score = score, fallback = k;
  }
  if (est.pairing_ks.empty()) {
    est.reliable = false;
    est.value = delta(std::max(fallback, lo));
    return est;
  }
  est.reliable = true;
  est.value = est.residual_series.back();
  if (est.residual_series.size() > 1)
    est.last_residual = std::abs(est.residual_series.back() - est.residual_series[est.residual_series.size() - 2]);
  return est;
}

}  // namespace detail

struct BusemannOptions {
  std::int64_t horizon = 256;  // field starts at min(n1, n2) - horizon
  double h = 1.0 / 64.0;
  double margin = 0.0;  // 0: 4 per unit of horizon
  double c = 1.0;       // pairing threshold W_k < c / (n - k)
  // Grid traces obey the discrete cocycle exactly; refined ones can settle on
  // a branch that is not the continuum minimizer when two branches nearly tie.
  bool refine = false;
  ActionParams params;
};

// B(P1, P2) for backward minimizers of slope v, from traces in one field.
inline BusemannEstimate busemann_from_field(const Environment& env, const OneSidedField& field, SpacePoint p1,
                                            SpacePoint p2, double c = 1.0, bool refine_paths = true) {
  const auto a = detail::trace_point(env, field, p1, refine_paths, {});
  const auto b = detail::trace_point(env, field, p2, refine_paths, {});
  return detail::busemann_from_traces(a, b, p1, p2, field.setup().v, c);
}

inline OneSidedField busemann_field(const Environment& env, const std::vector<SpacePoint>& pts, double v,
                                    const BusemannOptions& opt) {
  if (pts.empty()) throw Error("no endpoints");
  std::int64_t n_lo = pts[0].n, n_hi = pts[0].n;
  double x_lo = pts[0].x, x_hi = pts[0].x;
  for (const auto& p : pts) {
    n_lo = std::min(n_lo, p.n), n_hi = std::max(n_hi, p.n);
    x_lo = std::min(x_lo, p.x), x_hi = std::max(x_hi, p.x);
  }
  const std::int64_t m = n_lo - opt.horizon;
  const double margin = opt.margin > 0.0 ? opt.margin : 4.0 * static_cast<double>(n_hi - m);
  // endpoints at later times sit further along the drift; widen by v (n_hi - n_lo)
  const double drift = std::abs(v) * static_cast<double>(n_hi - n_lo);
  const GridSpec g = cone_grid(pts[0].x, x_lo - drift, x_hi + drift, v, m, n_hi, margin, opt.h);
  return OneSidedField(env, m, n_hi, g, {TraceSource::linear_initial_v, v, 0.0, opt.params});
}

inline BusemannEstimate busemann_estimate(const Environment& env, SpacePoint p1, SpacePoint p2, double v,
                                          const BusemannOptions& opt = {}) {
  const auto field = busemann_field(env, {p1, p2}, v, opt);
  return busemann_from_field(env, field, p1, p2, opt.c, opt.refine);
}

struct GlobalSolutionOptions {
  std::int64_t horizon = 256;
  double h = 1.0 / 64.0;
  double margin = 0.0;  // 0: 4 per unit of horizon
  double c = 1.0;
  bool refine = false;  // Busemann differences from grid traces
  ActionParams params;
};

// U(n, x) = B((0, 0), (n, x)) and u_v(n, x) on a spatial window for times
// [n_lo, n_hi], all from one field started at min(0, n_lo) - horizon.
class GlobalSolution {
 public:
  GlobalSolution(const Environment& env, double v, std::int64_t n_lo, std::int64_t n_hi, double x_lo, double x_hi,
                 const GlobalSolutionOptions& opt = {})
      : env_(env), v_(v), n_lo_(n_lo), n_hi_(n_hi), opt_(opt) {
    if (n_hi < n_lo || !(x_hi > x_lo)) throw Error("empty global-solution window");
    BusemannOptions bo;
    bo.horizon = opt.horizon;
    bo.h = opt.h;
    bo.margin = opt.margin;
    bo.params = opt.params;
    field_.emplace(busemann_field(env_, {{std::min<std::int64_t>(0, n_lo), 0.0}, {n_hi, x_lo}, {n_hi, x_hi}, {0, 0.0}},
                                  v, bo));
    const GridSpec& g = field_->grid();
    const auto a = g.node_at(x_lo), b = g.node_at(x_hi);
    if (!a || !b) throw Error("window ends must sit on grid nodes (dyadic, multiples of h)");
    i_lo_ = *a;
    i_hi_ = *b;
    anchor_ = detail::trace_point(env_, *field_, {0, 0.0}, opt.refine, {});
  }

  const OneSidedField& field() const { return *field_; }
  GridSpec window_grid() const { return {field_->grid().x(i_lo_), field_->grid().h, i_hi_ - i_lo_ + 1}; }

  // U on the window at time n; trusted window covers nodes with a reliable,
  // trusted Busemann estimate (as an index range of the window grid).
  GridProfile potential(std::int64_t n, std::vector<BusemannEstimate>* details = nullptr) const {
    check_time(n);
    const GridSpec wg = window_grid();
    std::vector<double> u(wg.count);
    std::vector<bool> ok(wg.count);
    for (std::size_t i = 0; i < wg.count; ++i) {
      const SpacePoint p{n, wg.x(i)};
      const auto tp = detail::trace_point(env_, *field_, p, opt_.refine, {});
      auto est = detail::busemann_from_traces(anchor_, tp, {0, 0.0}, p, v_, opt_.c);
      u[i] = est.value;
      ok[i] = est.reliable && !est.untrusted;
      if (details) details->push_back(std::move(est));
    }
    GridProfile out(wg, n, std::move(u));
    set_window(out, ok);
    return out;
  }

  // u_v(n, x_i) = x_i - x_{bp(i)} from the field's last step into n.
  GridProfile velocity(std::int64_t n) const {
    check_time(n);
    const auto full = field_->velocity(n);
    const GridSpec wg = window_grid();
    std::vector<double> u(full.values.begin() + static_cast<std::ptrdiff_t>(i_lo_),
                          full.values.begin() + static_cast<std::ptrdiff_t>(i_hi_ + 1));
    std::vector<bool> ok(wg.count);
    for (std::size_t i = 0; i < wg.count; ++i) ok[i] = trace_trusted(field_->result().stack, i_lo_ + i, n);
    GridProfile out(wg, n, std::move(u));
    set_window(out, ok);
    return out;
  }

 private:
  void check_time(std::int64_t n) const {
    if (n < n_lo_ || n > n_hi_) throw Error("time outside the global-solution window");
  }
  // Largest run of ok nodes becomes the trusted range.
  static void set_window(GridProfile& p, const std::vector<bool>& ok) {
    std::size_t best_lo = 1, best_hi = 0, run_lo = 0;
    bool in = false;
    for (std::size_t i = 0; i <= ok.size(); ++i) {
      if (i < ok.size() && ok[i]) {
        if (!in) run_lo = i, in = true;
      } else if (in) {
        in = false;
        if (best_lo > best_hi || i - 1 - run_lo > best_hi - best_lo) best_lo = run_lo, best_hi = i - 1;
      }
    }
    p.lo = best_lo;
    p.hi = best_hi;
  }

  Environment env_;
  double v_;
  std::int64_t n_lo_, n_hi_;
  GlobalSolutionOptions opt_;
  std::optional<OneSidedField> field_;
  std::size_t i_lo_ = 0, i_hi_ = 0;
  detail::TracedPoint anchor_;
};

struct FixedPointReport {
  double max_deviation = 0.0;  // after pinning both profiles at a common node
  std::size_t compared = 0;
};

// Compares evolve_one(U(n)) with U(n + 1) on nodes trusted by both, after
// removing the additive constant at the common node closest to the middle.
// Near the ends of U(n)'s window the step minimizes over a truncated set of
// predecessors, so pass a narrower compare range [x_lo, x_hi] leaving room
// for one step's displacement.
inline FixedPointReport fixed_point_deviation(const Environment& env, const GridProfile& u_n, const GridProfile& u_next,
                                              const ActionParams& params = {},
                                              std::optional<std::pair<double, double>> compare = std::nullopt) {
  if (!(u_n.grid == u_next.grid)) throw Error("fixed-point check needs profiles on the same grid");
  if (u_n.trusted_empty() || u_next.trusted_empty()) return {};
  const auto step = evolve_one(env, u_n, params, WatchRegion::none());
  std::size_t lo = std::max(step.next.lo, u_next.lo), hi = std::min(step.next.hi, u_next.hi);
  FixedPointReport rep;
  if (step.next.trusted_empty() || lo > hi) return rep;
  if (compare) {
    while (lo <= hi && u_n.x(lo) < compare->first) ++lo;
    while (hi >= lo && hi > 0 && u_n.x(hi) > compare->second) --hi;
    if (lo > hi || u_n.x(hi) > compare->second) return rep;
  }
  const std::size_t mid = std::clamp(u_n.size() / 2, lo, hi);
  const double shift = u_next.values[mid] - step.next.values[mid];
  for (std::size_t i = lo; i <= hi; ++i) {
    rep.max_deviation = std::max(rep.max_deviation, std::abs(step.next.values[i] + shift - u_next.values[i]));
    ++rep.compared;
  }
  return rep;
}

struct ShockRecord {
  std::int64_t time = 0;
  double x = 0.0;         // midpoint of the jump
  std::size_t index = 0;  // jump between nodes index and index + 1
  double u_left = 0.0;
  double u_right = 0.0;
  std::optional<std::size_t> successor;  // position in the next frame
  bool successor_nearest = false;        // no straddling jump; nearest one used
  bool exits = false;                    // no shock in the next frame's window
};

// Jumps of M_i = x_i - u_i larger than jump_tol (default 4h) on trusted nodes.
inline std::vector<ShockRecord> detect_shocks(const GridProfile& u, std::optional<double> jump_tol = std::nullopt) {
  const double tol = jump_tol.value_or(4.0 * u.grid.h);
  std::vector<ShockRecord> out;
  if (u.trusted_empty()) return out;
  for (std::size_t i = u.lo; i < u.hi; ++i) {
    const double m0 = u.x(i) - u.values[i], m1 = u.x(i + 1) - u.values[i + 1];
    if (m1 - m0 > tol) {
      ShockRecord r;
      r.time = u.time;
      r.index = i;
      r.x = 0.5 * (u.x(i) + u.x(i + 1));
      r.u_left = u.values[i];
      r.u_right = u.values[i + 1];
      out.push_back(r);
    }
  }
  return out;
}

struct ShockForest {
  std::vector<std::vector<ShockRecord>> frames;  // one per time, consecutive
  std::size_t merges = 0;                        // sum over records of (predecessors - 1)
};

// Shocks at consecutive times t0..t1 of a backpointer stack, each linked to one
// successor at t + 1: the jump (j, j+1) with bp(j) <= i < i + 1 <= bp(j+1), else
// the nearest jump of the next frame.
inline ShockForest shock_genealogy(const BackpointerStack& stack, std::int64_t t0, std::int64_t t1,
                                   std::optional<double> jump_tol = std::nullopt) {
  if (t0 <= stack.start_time || t1 > stack.end_time() || t1 < t0) throw Error("genealogy times outside the stack");
  ShockForest forest;
  const GridSpec& g = stack.grid;
  for (std::int64_t t = t0; t <= t1; ++t) {
    const auto& map = stack.map_into(t);
    std::vector<double> u(g.count);
    for (std::size_t i = 0; i < g.count; ++i) u[i] = (static_cast<double>(i) - static_cast<double>(map[i])) * g.h;
    GridProfile prof(g, t, std::move(u));
    std::tie(prof.lo, prof.hi) = stack.windows[static_cast<std::size_t>(t - stack.start_time)];
    forest.frames.push_back(detect_shocks(prof, jump_tol));
  }
  for (std::size_t f = 0; f + 1 < forest.frames.size(); ++f) {
    auto& cur = forest.frames[f];
    const auto& next = forest.frames[f + 1];
    const auto& map = stack.map_into(t0 + static_cast<std::int64_t>(f) + 1);
    std::vector<std::size_t> preds(next.size(), 0);
    for (auto& r : cur) {
      if (next.empty()) {
        r.exits = true;
        continue;
      }
      for (std::size_t s = 0; s < next.size(); ++s) {
        const std::size_t j = next[s].index;
        if (map[j] <= r.index && map[j + 1] >= r.index + 1) {
          r.successor = s;
          break;
        }
      }
      if (!r.successor) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < next.size(); ++s)
          if (std::abs(next[s].x - r.x) < std::abs(next[best].x - r.x)) best = s;
        r.successor = best;
        r.successor_nearest = true;
      }
      ++preds[*r.successor];
    }
    for (std::size_t c : preds)
      if (c > 1) forest.merges += c - 1;
  }
  return forest;
}

}  // namespace kickwave
