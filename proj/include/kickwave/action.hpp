#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "kickwave/environment.hpp"
#include "kickwave/error.hpp"
#include "kickwave/initial_data.hpp"

namespace kickwave {

// A discrete trajectory gamma_{start}, ..., gamma_{end}.
struct Path {
  std::int64_t start_time = 0;
  std::vector<double> x;

  Path() = default;
  Path(std::int64_t t0, std::vector<double> pos) : start_time(t0), x(std::move(pos)) {
    if (x.empty()) throw Error("path must contain at least one point");
  }

  std::size_t length() const { return x.size(); }
  std::int64_t end_time() const { return start_time + static_cast<std::int64_t>(x.size()) - 1; }
  bool covers(std::int64_t t) const { return t >= start_time && t <= end_time(); }
  double at(std::int64_t t) const { return x.at(static_cast<std::size_t>(t - start_time)); }

  // Restriction to the times [t0, t1].
  Path restrict(std::int64_t t0, std::int64_t t1) const {
    if (!covers(t0) || !covers(t1) || t1 < t0) throw Error("restriction outside path support");
    const auto b = x.begin() + (t0 - start_time);
    return Path(t0, std::vector<double>(b, b + (t1 - t0 + 1)));
  }
};

// Endpoint weighting p of the potential action:
// p F(n0) + sum_{interior} F + (1 - p) F(n1).
struct ActionParams {
  double p = 1.0;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("action weight p must lie in [0, 1]");
  }
};

namespace detail {
inline void require_steps(const Path& path) {
  if (path.length() < 2) throw Error("degenerate path");
}
}  // namespace detail

inline double kinetic_action(const Path& path) {
  detail::require_steps(path);
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < path.x.size(); ++k) {
    const double d = path.x[k + 1] - path.x[k];
    s += 0.5 * d * d;
  }
  return s;
}

inline double potential_action(const Environment& env, const Path& path, const ActionParams& params = {}) {
  detail::require_steps(path);
  params.validate();
  const std::size_t last = path.x.size() - 1;
  double s = params.p * env.potential(path.start_time, path.x[0]);
  for (std::size_t k = 1; k < last; ++k)
    s += env.potential(path.start_time + static_cast<std::int64_t>(k), path.x[k]);
  s += (1.0 - params.p) * env.potential(path.end_time(), path.x[last]);
  return s;
}

// W(gamma_{n0}) + kinetic + potential action; W absent means W == 0.
inline double total_action(const Environment& env, const Path& path, const ActionParams& params = {},
                           const std::optional<InitialPotential>& initial = std::nullopt) {
  const double w0 = initial ? initial->value(path.x.front()) : 0.0;
  return w0 + kinetic_action(path) + potential_action(env, path, params);
}

// Discrete Euler-Lagrange map: gamma_{k+1} = 2 gamma_k - gamma_{k-1} + f(k, gamma_k).
inline double el_step(const Environment& env, std::int64_t k, double prev, double cur) {
  return 2.0 * cur - prev + env.force(k, cur);
}

// Max over interior k of |gamma_{k+1} - 2 gamma_k + gamma_{k-1} - f(k, gamma_k)|.
inline double el_residual(const Environment& env, const Path& path) {
  double r = 0.0;
  for (std::size_t k = 1; k + 1 < path.x.size(); ++k) {
    const auto t = path.start_time + static_cast<std::int64_t>(k);
    const double e = path.x[k + 1] - 2.0 * path.x[k] + path.x[k - 1] - env.force(t, path.x[k]);
    r = std::max(r, std::abs(e));
  }
  return r;
}

// Iterate el_step from the two seeds (gamma_{t0}, gamma_{t0+1}) for `steps` steps.
inline Path el_orbit(const Environment& env, std::int64_t t0, double x0, double x1, std::size_t steps) {
  std::vector<double> xs{x0, x1};
  for (std::size_t j = 0; j < steps; ++j) {
    const std::size_t k = xs.size() - 1;
    xs.push_back(el_step(env, t0 + static_cast<std::int64_t>(k), xs[k - 1], xs[k]));
  }
  return Path(t0, std::move(xs));
}

// Sigma(gamma) = sum_j (|floor(gamma_{j+1}) - floor(gamma_j)| + 1).
inline std::int64_t sigma_statistic(const Path& path) {
  detail::require_steps(path);
  std::int64_t s = 0;
  for (std::size_t j = 0; j + 1 < path.x.size(); ++j) {
    const auto a = static_cast<std::int64_t>(std::floor(path.x[j]));
    const auto b = static_cast<std::int64_t>(std::floor(path.x[j + 1]));
    s += (b > a ? b - a : a - b) + 1;
  }
  return s;
}

inline double max_excursion(const Path& path) {
  double m = 0.0;
  for (double v : path.x) m = std::max(m, std::abs(v - path.x.front()));
  return m;
}

}  // namespace kickwave
