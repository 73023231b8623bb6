#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kickwave/action.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/grid.hpp"

namespace kickwave {

using Index = std::uint32_t;

struct EnvelopeResult {
  std::vector<double> values;
  std::vector<Index> argmin;
};

// U_i = min_j [V_j + (x_i - x_j)^2 / 2] by the lower envelope of parabolas,
// O(N). Ties go to the largest j, so argmin is nondecreasing.
inline EnvelopeResult quadratic_envelope(std::span<const double> v_in, const GridSpec& grid) {
  const std::size_t n = v_in.size();
  if (n != grid.count) throw Error("envelope input does not match grid");
  if (n > std::numeric_limits<Index>::max()) throw Error("grid too large");
  const double h2 = grid.h * grid.h;
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<Index> hull(n);
  std::vector<double> bound(n + 1);  // in index units
  std::size_t top = 0;
  hull[0] = 0;
  bound[0] = -inf;
  bound[1] = inf;
  for (std::size_t q = 1; q < n; ++q) {
    double s = 0.0;
    for (;;) {
      const std::size_t j = hull[top];
      const double dq = static_cast<double>(q - j);
      s = 0.5 * static_cast<double>(q + j) + (v_in[q] - v_in[j]) / (dq * h2);
      if (s <= bound[top] && top > 0) {
        --top;
        continue;
      }
      break;
    }
    ++top;
    hull[top] = static_cast<Index>(q);
    bound[top] = s;
    bound[top + 1] = inf;
  }

  EnvelopeResult out;
  out.values.resize(n);
  out.argmin.resize(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = static_cast<double>(i);
    while (bound[k + 1] <= xi) ++k;
    const Index j = hull[k];
    const double d = (static_cast<double>(i) - static_cast<double>(j)) * grid.h;
    out.values[i] = v_in[j] + 0.5 * d * d;
    out.argmin[i] = j;
  }
  return out;
}

// Argmin maps of consecutive kicks. maps[k] sends a node at time
// start_time + k + 1 to its optimal predecessor at time start_time + k;
// windows[k] is the trusted index window at time start_time + k.
struct BackpointerStack {
  std::int64_t start_time = 0;
  GridSpec grid;
  std::vector<std::vector<Index>> maps;
  std::vector<std::pair<std::size_t, std::size_t>> windows;

  std::int64_t end_time() const { return start_time + static_cast<std::int64_t>(maps.size()); }

  const std::vector<Index>& map_into(std::int64_t t) const {
    if (t <= start_time || t > end_time()) throw Error("no backpointer map for that time");
    return maps[static_cast<std::size_t>(t - start_time - 1)];
  }

  bool trusted(std::int64_t t, std::size_t i) const {
    const auto& w = windows.at(static_cast<std::size_t>(t - start_time));
    return w.first <= w.second && i >= w.first && i <= w.second;
  }
};

struct StepResult {
  GridProfile next;
  std::vector<Index> argmin;
  bool boundary_contact = false;
};

// Index range whose trustworthiness the caller cares about; boundary contact
// is reported when the trusted window no longer covers it.
struct WatchRegion {
  std::size_t lo = 0;
  std::size_t hi = 0;

  static WatchRegion central_half(const GridSpec& g) { return {g.count / 4, g.count - 1 - g.count / 4}; }
  // Only an empty trusted window counts as contact.
  static WatchRegion none() { return {1, 0}; }
  bool empty() const { return lo > hi; }
};

namespace detail {

inline void require_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error("profile values must be finite");
}

inline std::pair<std::size_t, std::size_t> propagate_window(const std::vector<Index>& argmin, std::size_t lo,
                                                            std::size_t hi) {
  std::size_t new_lo = 1, new_hi = 0;  // empty
  if (lo > hi) return {new_lo, new_hi};
  bool found = false;
  for (std::size_t i = 0; i < argmin.size(); ++i) {
    const std::size_t a = argmin[i];
    if (a > lo && a < hi) {
      if (!found) new_lo = i;
      found = true;
      new_hi = i;
    } else if (found && a >= hi) {
      break;
    }
  }
  return {new_lo, new_hi};
}

}  // namespace detail

// How the kick F(n, .) enters the grid problem: its value at each node, or
// its lowest value in each node's cell (Environment::cell_minima), which keeps
// wells narrower than h visible. cell_min is a relaxation used to seed
// continuum minimizers; the grid Hopf-Lax map itself uses nodes.
enum class KickSampling { nodes, cell_min };

inline std::vector<double> sample_kick(const Environment& env, std::int64_t n, const GridSpec& g, KickSampling k) {
  return k == KickSampling::nodes ? env.sample_potential(n, g) : env.cell_minima(n, g).values;
}

// One kick and one unit of free transport:
// U(x) = min_y [W(y) + p F(n, y) + (x - y)^2 / 2] + (1 - p) F(n + 1, x).
inline StepResult evolve_one(const Environment& env, const GridProfile& w, const ActionParams& params = {},
                             std::optional<WatchRegion> watch = std::nullopt,
                             KickSampling kicks = KickSampling::nodes) {
  params.validate();
  detail::require_finite(w.values);
  const GridSpec& g = w.grid;
  std::vector<double> v = w.values;
  if (params.p > 0.0) {
    const auto f = sample_kick(env, w.time, g, kicks);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += params.p * f[i];
  }
  auto env_res = quadratic_envelope(v, g);
  if (params.p < 1.0) {
    const auto f = sample_kick(env, w.time + 1, g, kicks);
    for (std::size_t i = 0; i < v.size(); ++i) env_res.values[i] += (1.0 - params.p) * f[i];
  }
  StepResult out;
  out.next = GridProfile(g, w.time + 1, std::move(env_res.values));
  std::tie(out.next.lo, out.next.hi) = detail::propagate_window(env_res.argmin, w.lo, w.hi);
  const WatchRegion wr = watch.value_or(WatchRegion::central_half(g));
  out.boundary_contact = out.next.trusted_empty() || (!wr.empty() && (out.next.lo > wr.lo || out.next.hi < wr.hi));
  out.argmin = std::move(env_res.argmin);
  return out;
}

struct EvolveOptions {
  std::optional<WatchRegion> watch;
  bool keep_history = false;
  bool keep_backpointers = true;
  KickSampling kicks = KickSampling::nodes;
};

struct EvolveResult {
  GridProfile profile;
  BackpointerStack stack;
  bool boundary_contact = false;
  std::vector<GridProfile> history;  // profiles at start_time..end_time if kept

  const GridProfile& at(std::int64_t t) const {
    const auto k = static_cast<std::size_t>(t - stack.start_time);
    if (history.empty() || t < stack.start_time || k >= history.size())
      throw Error("profile history not kept for that time");
    return history[k];
  }
};

// Phi^{n0, n1} on a grid: evolve_one applied n1 - n0 times.
inline EvolveResult evolve(const Environment& env, const GridProfile& w, std::int64_t n_end,
                           const ActionParams& params = {}, const EvolveOptions& opt = {}) {
  if (n_end < w.time) throw Error("evolve end time precedes the profile time");
  EvolveResult res;
  res.stack.start_time = w.time;
  res.stack.grid = w.grid;
  res.stack.windows.emplace_back(w.lo, w.hi);
  res.profile = w;
  if (opt.keep_history) res.history.push_back(w);
  for (std::int64_t t = w.time; t < n_end; ++t) {
    auto step = evolve_one(env, res.profile, params, opt.watch, opt.kicks);
    res.boundary_contact = res.boundary_contact || step.boundary_contact;
    res.stack.windows.emplace_back(step.next.lo, step.next.hi);
    if (opt.keep_backpointers) res.stack.maps.push_back(std::move(step.argmin));
    res.profile = std::move(step.next);
    if (opt.keep_history) res.history.push_back(res.profile);
  }
  return res;
}

// Velocity u_i = x_i - x_{bp(i)} from a potential and its last argmin map.
inline GridProfile velocity_from(const GridProfile& w, const std::vector<Index>& argmin) {
  if (argmin.size() != w.size()) throw Error("argmin map does not match profile");
  std::vector<double> u(w.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = (static_cast<double>(i) - static_cast<double>(argmin[i])) * w.grid.h;
  GridProfile out(w.grid, w.time, std::move(u));
  out.lo = w.lo;
  out.hi = w.hi;
  return out;
}

struct SlopeProbe {
  double v_minus = 0.0;
  double v_plus = 0.0;
};

namespace detail {
inline double ls_slope(const GridProfile& w, std::size_t a, std::size_t b) {
  const double m = static_cast<double>(b - a + 1);
  double sx = 0, sy = 0;
  for (std::size_t i = a; i <= b; ++i) {
    sx += w.x(i);
    sy += w.values[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = a; i <= b; ++i) {
    const double dx = w.x(i) - mx;
    sxx += dx * dx;
    sxy += dx * (w.values[i] - my);
  }
  return sxy / sxx;
}
}  // namespace detail

// Least-squares slopes of W over the outer 10% of its trusted window.
inline SlopeProbe slope_probe(const GridProfile& w) {
  if (w.trusted_empty() || w.hi - w.lo + 1 < 4) throw Error("trusted window too small for a slope probe");
  const std::size_t span = w.hi - w.lo + 1;
  const std::size_t m = std::max<std::size_t>(2, span / 10);
  return {detail::ls_slope(w, w.lo, w.lo + m - 1), detail::ls_slope(w, w.hi - m + 1, w.hi)};
}

// Point-constrained start: 0 at the node x0 (within rounding), `penalty` elsewhere.
inline GridProfile point_source(const GridSpec& grid, double x0, std::int64_t time, double penalty = 1e9) {
  const auto idx = grid.node_near(x0);
  if (!idx) throw Error("point-source start must sit on a grid node");
  std::vector<double> v(grid.count, penalty);
  v[*idx] = 0.0;
  return GridProfile(grid, time, std::move(v));
}

struct EndpointStep {
  double value = 0.0;
  std::size_t predecessor = 0;
  bool at_window_edge = false;
};

// Kicked profile V = W + p F(n, .) at the time of W; lets endpoint_step be
// queried for many off-grid endpoints at time n + 1.
struct KickedProfile {
  GridProfile base;
  std::vector<double> kicked;

  KickedProfile(const Environment& env, const GridProfile& w, const ActionParams& params,
                KickSampling kicks = KickSampling::nodes)
      : base(w), kicked(w.values) {
    if (params.p > 0.0) {
      const auto f = sample_kick(env, w.time, w.grid, kicks);
      for (std::size_t i = 0; i < kicked.size(); ++i) kicked[i] += params.p * f[i];
    }
  }
};

// Value at an arbitrary endpoint x at time n + 1 and its optimal predecessor
// among trusted nodes of the profile at time n (rightmost on ties).
inline EndpointStep endpoint_step(const Environment& env, const KickedProfile& kp, double x,
                                  const ActionParams& params = {}) {
  const GridProfile& w = kp.base;
  if (w.trusted_empty()) throw Error("profile has no trusted nodes");
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = w.lo;
  for (std::size_t j = w.lo; j <= w.hi; ++j) {
    const double d = x - w.x(j);
    const double c = kp.kicked[j] + 0.5 * d * d;
    if (c <= best) {
      best = c;
      arg = j;
    }
  }
  EndpointStep out;
  out.predecessor = arg;
  out.value = best + (1.0 - params.p) * env.potential(w.time + 1, x);
  out.at_window_edge = (arg == w.lo && w.lo > 0) || (arg == w.hi && w.hi + 1 < w.size()) ||
                       (arg == 0 && x < w.x(0)) || (arg + 1 == w.size() && x > w.x(arg));
  return out;
}

}  // namespace kickwave
