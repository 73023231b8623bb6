#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kickwave/busemann.hpp"
#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/grid.hpp"
#include "kickwave/hopf_lax.hpp"
#include "kickwave/initial_data.hpp"
#include "kickwave/minimizers.hpp"
#include "kickwave/rng.hpp"

namespace kickwave {

// Initial potential given analytically, or as samples read from a file. Only
// analytic data has exact slope information; sampled data is classified from
// probe slopes and flagged approximate.
struct InitialDataSpec {
  std::optional<InitialPotential> analytic;
  std::optional<GridProfile> sampled;

  static InitialDataSpec from(InitialPotential w) { return {std::move(w), std::nullopt}; }
  static InitialDataSpec from_samples(GridProfile w) { return {std::nullopt, std::move(w)}; }

  bool approximate() const { return !analytic.has_value(); }

  AsymptoticSlopes slopes() const {
    if (analytic) return analytic->asymptotic_slopes();
    if (!sampled) throw Error("initial data spec is empty");
    const auto pr = slope_probe(*sampled);
    return {pr.v_minus, pr.v_minus, pr.v_plus, pr.v_plus};
  }
};

// Checks analytic slope data against W(x)/x at |x| in [L/2, L]: every sample
// must sit within [liminf - tol, limsup + tol] of its side.
inline bool slopes_consistent(const InitialPotential& w, double half_width, double tol, std::size_t samples = 64) {
  const auto s = w.asymptotic_slopes();
  for (std::size_t j = 0; j < samples; ++j) {
    const double x = half_width * (0.5 + 0.5 * static_cast<double>(j) / static_cast<double>(samples - 1));
    const double rp = w.value(x) / x, rm = w.value(-x) / -x;
    if (std::isfinite(s.liminf_plus) && rp < s.liminf_plus - tol) return false;
    if (std::isfinite(s.limsup_plus) && rp > s.limsup_plus + tol) return false;
    if (std::isfinite(s.liminf_minus) && rm < s.liminf_minus - tol) return false;
    if (std::isfinite(s.limsup_minus) && rm > s.limsup_minus + tol) return false;
  }
  return true;
}

enum class Basin { fan_v0, left_wins, right_wins, unclassified };

inline const char* to_string(Basin b) {
  switch (b) {
    case Basin::fan_v0: return "fan_v0";
    case Basin::left_wins: return "left_wins";
    case Basin::right_wins: return "right_wins";
    default: return "unclassified";
  }
}

struct Classification {
  Basin basin = Basin::unclassified;
  double v = 0.0;  // predicted attractor slope (meaningful unless unclassified)
  bool approximate = false;
};

// Applies the three basin condition sets to the slope data; data on the
// boundary of a strict inequality, or outside the potential space
// (W(x)/|x| unbounded below), stays unclassified.
inline Classification classify_initial(const InitialDataSpec& spec) {
  const auto s = spec.slopes();
  Classification c;
  c.approximate = spec.approximate();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (s.liminf_plus == -inf || s.limsup_minus == inf) return c;
  if (s.liminf_plus >= 0.0 && s.limsup_minus <= 0.0) {
    c.basin = Basin::fan_v0;
    return c;
  }
  if (s.has_limit_minus() && s.liminf_minus > 0.0 && std::isfinite(s.liminf_minus) &&
      s.liminf_plus > -s.liminf_minus) {
    c.basin = Basin::left_wins;
    c.v = s.liminf_minus;
    return c;
  }
  if (s.has_limit_plus() && s.liminf_plus < 0.0 && std::isfinite(s.liminf_plus) && s.limsup_minus < -s.liminf_plus) {
    c.basin = Basin::right_wins;
    c.v = s.liminf_plus;
    return c;
  }
  return c;
}

namespace detail {

// M(x) = x - u(x) through the nodes, extended with slope 1 past both ends.
class LagrangianMap {
 public:
  explicit LagrangianMap(const GridProfile& u) : x_(u.size()), m_(u.size()) {
    if (u.size() < 2) throw Error("metric needs at least two nodes");
    for (std::size_t i = 0; i < u.size(); ++i) {
      x_[i] = u.x(i);
      m_[i] = x_[i] - u.values[i];
      if (!std::isfinite(m_[i])) throw Error("not in G: non-finite velocity");
      if (i > 0 && m_[i] < m_[i - 1]) throw Error("not in G: x - u(x) decreases between nodes");
    }
  }

  const std::vector<double>& breakpoints() const { return m_; }

  // inf{x : M(x) >= y}
  double inv_lower(double y) const {
    if (y <= m_.front()) return x_.front() + (y - m_.front());
    if (y > m_.back()) return x_.back() + (y - m_.back());
    const auto i = static_cast<std::size_t>(std::lower_bound(m_.begin(), m_.end(), y) - m_.begin());
    return interp(i, y);
  }
  // inf{x : M(x) > y}, the right limit of inv_lower at y
  double inv_upper(double y) const {
    if (y < m_.front()) return x_.front() + (y - m_.front());
    if (y >= m_.back()) return x_.back() + (y - m_.back());
    const auto i = static_cast<std::size_t>(std::upper_bound(m_.begin(), m_.end(), y) - m_.begin());
    return interp(i, y);
  }

 private:
  // m_[i-1] <= y <= m_[i] with m_[i-1] < m_[i]
  double interp(std::size_t i, double y) const {
    const double t = (y - m_[i - 1]) / (m_[i] - m_[i - 1]);
    return x_[i - 1] + t * (x_[i] - x_[i - 1]);
  }
  std::vector<double> x_, m_;
};

}  // namespace detail

struct MetricTerms {
  double d = 0.0;
  std::vector<double> d_n;  // d_N for N = 1..N_max, each capped at 1
};

// d(u, w) = sum_N 2^-N min(1, sup_{|y| <= N} |M_u^-1(y) - M_w^-1(y)|), truncated
// at N_max (tail below 2^-N_max). Both inverses are piecewise linear between
// the merged breakpoints, so the sup is attained at a breakpoint as a left or
// right limit.
inline MetricTerms metric_terms(const GridProfile& u, const GridProfile& w, std::size_t n_max = 16) {
  if (n_max == 0) throw Error("metric needs N_max >= 1");
  const detail::LagrangianMap mu(u), mw(w);
  const double big_n = static_cast<double>(n_max);
  std::vector<double> ys;
  for (const auto* m : {&mu, &mw})
    for (double y : m->breakpoints())
      if (std::abs(y) < big_n) ys.push_back(y);
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  // running sup for |y| <= N, swept outward from the origin
  struct Event {
    double ay;
    double diff;
    bool strict = false;  // counts only for N > ay (a right limit at y = ay > 0)
  };
  std::vector<Event> ev;
  ev.reserve(4 * ys.size() + 4 * n_max);
  for (double y : ys) {
    ev.push_back({std::abs(y), std::abs(mu.inv_lower(y) - mw.inv_lower(y))});
    ev.push_back({std::abs(y), std::abs(mu.inv_upper(y) - mw.inv_upper(y)), y > 0.0});
  }
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double y = static_cast<double>(n);
    // closed interval [-N, N]: the point itself and the inward limit
    ev.push_back({y, std::abs(mu.inv_lower(y) - mw.inv_lower(y))});
    ev.push_back({y, std::abs(mu.inv_upper(-y) - mw.inv_upper(-y))});
    ev.push_back({y, std::abs(mu.inv_lower(-y) - mw.inv_lower(-y))});
  }
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    return a.ay < b.ay || (a.ay == b.ay && !a.strict && b.strict);
  });

  MetricTerms out;
  double sup = 0.0, weight = 0.5;
  std::size_t k = 0;
  for (std::size_t n = 1; n <= n_max; ++n, weight *= 0.5) {
    const double y = static_cast<double>(n);
    while (k < ev.size() && (ev[k].ay < y || (ev[k].ay == y && !ev[k].strict))) sup = std::max(sup, ev[k++].diff);
    out.d_n.push_back(std::min(sup, 1.0));
    out.d += weight * out.d_n.back();
  }
  return out;
}

inline double metric_d(const GridProfile& u, const GridProfile& w, std::size_t n_max = 16) {
  return metric_terms(u, w, n_max).d;
}

struct EquivalenceOptions {
  std::size_t n_max = 16;
  double tol = 0.05;  // "converged": the last quarter of the sequence stays below tol
  std::optional<double> jump_tol;  // continuity nodes of the limit; default 4h
};

struct EquivalenceReport {
  std::vector<double> d;          // d(u_k, limit)
  std::vector<double> pointwise;  // max |u_k - limit| over continuity nodes
  bool d_converges = false;
  bool pointwise_converges = false;
  bool consistent() const { return d_converges == pointwise_converges; }
};

// d-convergence against pointwise convergence at the limit's continuity
// nodes (both neighbours within jump_tol) for a finite sequence.
inline EquivalenceReport convergence_equivalence_check(const std::vector<GridProfile>& seq, const GridProfile& limit,
                                                       const EquivalenceOptions& opt = {}) {
  if (seq.empty()) throw Error("empty sequence");
  const double jt = opt.jump_tol.value_or(4.0 * limit.grid.h);
  std::vector<bool> cont(limit.size(), true);
  for (std::size_t i = 0; i + 1 < limit.size(); ++i)
    if (std::abs(limit.values[i + 1] - limit.values[i]) > jt) cont[i] = cont[i + 1] = false;
  EquivalenceReport rep;
  for (const auto& u : seq) {
    if (!(u.grid == limit.grid)) throw Error("sequence and limit must share a grid");
    rep.d.push_back(metric_d(u, limit, opt.n_max));
    double e = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (cont[i]) e = std::max(e, std::abs(u.values[i] - limit.values[i]));
    rep.pointwise.push_back(e);
  }
  const std::size_t tail = seq.size() - std::max<std::size_t>(1, seq.size() / 4);
  auto tail_below = [&](const std::vector<double>& s) {
    return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(tail), s.end(), [&](double x) { return x <= opt.tol; });
  };
  rep.d_converges = tail_below(rep.d);
  rep.pointwise_converges = tail_below(rep.pointwise);
  return rep;
}

// Hand-built velocity sequences for the equivalence check.
namespace families {

// u_k = 1 left of 1/k, 0 from 1/k on; limit: the unit step at 0.
inline std::vector<GridProfile> moving_steps(const GridSpec& g, std::size_t count) {
  std::vector<GridProfile> out;
  for (std::size_t k = 1; k <= count; ++k) {
    std::vector<double> u(g.count);
    for (std::size_t i = 0; i < g.count; ++i) u[i] = g.x(i) < 1.0 / static_cast<double>(k) ? 1.0 : 0.0;
    out.emplace_back(g, 0, std::move(u));
  }
  return out;
}

inline GridProfile step(const GridSpec& g, double height = 1.0) {
  std::vector<double> u(g.count);
  for (std::size_t i = 0; i < g.count; ++i) u[i] = g.x(i) < 0.0 ? height : 0.0;
  return GridProfile(g, 0, std::move(u));
}

// Steps at 0 with heights 1 + (-1)^k / 2; no pointwise limit left of 0.
inline std::vector<GridProfile> oscillating_heights(const GridSpec& g, std::size_t count) {
  std::vector<GridProfile> out;
  for (std::size_t k = 1; k <= count; ++k) out.push_back(step(g, k % 2 == 0 ? 1.5 : 0.5));
  return out;
}

// base + eps * 0.5 sin(x); stays in G while eps * 0.5 < 1 - (largest base slope).
inline GridProfile perturbed(const GridProfile& base, double eps) {
  GridProfile out = base;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += eps * 0.5 * std::sin(out.x(i));
  return out;
}

// Random G-valid profile: M = x - u rises by U(0, 2h) per node plus, with
// probability 1/50, a jump of U(0, 1.5); M starts at x_min + U(-2, 2).
inline GridProfile random_monotone(const GridSpec& g, CellStream& rng) {
  std::vector<double> u(g.count);
  double m = g.x(0) + 4.0 * rng.uniform() - 2.0;
  for (std::size_t i = 0; i < g.count; ++i) {
    if (i > 0) {
      m += 2.0 * g.h * rng.uniform();
      if (rng.uniform() < 0.02) m += 1.5 * rng.uniform();
    }
    u[i] = g.x(i) - m;
  }
  return GridProfile(g, 0, std::move(u));
}

}  // namespace families

struct PullbackConfig {
  std::vector<std::int64_t> ms{-16, -32, -64, -128};
  std::int64_t obs_time = 0;
  double v = 0.0;
  double window = 20.0;          // velocities compared on [-window, window]
  double h = 1.0 / 64.0;
  double margin_per_step = 1.0;  // evolve grid reaches window + margin_per_step * |m| + 8
  std::size_t n_max = 16;
  GlobalSolutionOptions global{512, 1.0 / 64.0, 160.0, 1.0, false, {}};
  ActionParams params;
};

struct PullbackRow {
  std::int64_t m = 0;
  double d = 0.0;
  double slope = 0.0;  // y*(m) / (m - obs_time) for the preimage of x = 0
  bool boundary = false;
};

// Window of a profile as its own profile (nodes within [-L, L] around 0).
inline GridProfile crop(const GridProfile& p, double half_width) {
  const auto a = p.grid.node_near(-half_width), b = p.grid.node_near(half_width);
  if (!a || !b) throw Error("crop window ends are not grid nodes");
  const GridSpec g{p.grid.x(*a), p.grid.h, *b - *a + 1};
  std::vector<double> v(p.values.begin() + static_cast<std::ptrdiff_t>(*a),
                        p.values.begin() + static_cast<std::ptrdiff_t>(*b + 1));
  GridProfile out(g, p.time, std::move(v));
  const std::size_t tlo = std::max(p.lo, *a), thi = std::min(p.hi, *b);
  if (p.trusted_empty() || tlo > thi) {
    out.lo = 1, out.hi = 0;
  } else {
    out.lo = tlo - *a, out.hi = thi - *a;
  }
  return out;
}

// d(Psi^{m, n} w, u_v(n, .)) for each start time m on one environment, with
// the target velocity built from a single global-solution field.
inline std::vector<PullbackRow> pullback_experiment(const Environment& env, const InitialPotential& w,
                                                    const PullbackConfig& cfg) {
  if (cfg.ms.empty()) throw Error("pullback needs start times");
  for (auto m : cfg.ms)
    if (m >= cfg.obs_time) throw Error("pullback start times must precede the observation time");
  GlobalSolutionOptions gopt = cfg.global;
  gopt.h = cfg.h;
  gopt.params = cfg.params;
  const GlobalSolution gs(env, cfg.v, cfg.obs_time, cfg.obs_time, -cfg.window, cfg.window, gopt);
  const GridProfile target = gs.velocity(cfg.obs_time);
  const bool target_ok = target.lo == 0 && target.hi + 1 == target.size();

  std::vector<PullbackRow> rows;
  for (auto m : cfg.ms) {
    const double span = static_cast<double>(cfg.obs_time - m);
    const double reach = cfg.window + cfg.margin_per_step * span + 8.0;
    const GridSpec g = GridSpec::around(0.0, reach + std::max(0.0, -cfg.v * span), reach + std::max(0.0, cfg.v * span), cfg.h);
    const auto lo = g.node_near(-cfg.window), hi = g.node_near(cfg.window), zero = g.node_near(0.0);
    EvolveOptions eo;
    eo.watch = WatchRegion{*lo, *hi};
    const auto res = evolve(env, w.sample(g, m), cfg.obs_time, cfg.params, eo);
    const GridProfile u = crop(velocity_from(res.profile, res.stack.map_into(cfg.obs_time)), cfg.window);
    PullbackRow row;
    row.m = m;
    row.d = metric_d(u, target, cfg.n_max);
    row.slope = trace_back(res.stack, *zero).x.front() / static_cast<double>(m - cfg.obs_time);
    row.boundary = res.boundary_contact || !target_ok;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace kickwave
