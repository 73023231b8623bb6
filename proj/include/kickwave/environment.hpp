#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "kickwave/error.hpp"
#include "kickwave/grid.hpp"
#include "kickwave/rng.hpp"

namespace kickwave {

struct KickPoint {
  std::int64_t tau = 0;
  double eta = 0.0;
  double xi = 0.0;
  double kappa = 1.0;

  bool operator==(const KickPoint&) const = default;
};

struct XiDistribution {
  enum class Kind { uniform, two_point } kind = Kind::uniform;
  double p_plus = 0.5;  // two_point: P(xi = +1)
};

struct KappaDistribution {
  enum class Kind { uniform, fixed } kind = Kind::uniform;
  double value = 1.0;  // fixed scale
};

enum class Bump { quartic };

struct EnvironmentConfig {
  std::uint64_t master_seed = 0;
  double intensity = 1.0;
  XiDistribution xi;
  KappaDistribution kappa;
  Bump bump = Bump::quartic;

  void validate() const {
    if (!(intensity >= 0.0) || !std::isfinite(intensity) || intensity > 500.0)
      throw Error("intensity must lie in [0, 500]");
    if (xi.kind == XiDistribution::Kind::two_point && !(xi.p_plus >= 0.0 && xi.p_plus <= 1.0))
      throw Error("two_point probability must lie in [0, 1]");
    if (kappa.kind == KappaDistribution::Kind::fixed && !(kappa.value > 0.0 && kappa.value <= 1.0))
      throw Error("fixed kappa must lie in (0, 1]");
  }
};

// Default bump phi(y) = (1 - y^2)^2 on |y| < 1.
struct QuarticBump {
  static double value(double y) {
    const double s = 1.0 - y * y;
    return s * s;
  }
  static double derivative(double y) { return -4.0 * y * (1.0 - y * y); }
  static double second_derivative(double y) { return 12.0 * y * y - 4.0; }
};

// Shot-noise kick potential F(n, x) = sum xi * phi((x - eta) / kappa) over the
// marked Poisson points with tau = n. The realization is generated lazily per
// unit cell {n} x [i, i+1) from a stream keyed by (seed, n, i).
//
// An Environment is an immutable view: shifted() and sheared() relabel
// queries (n, x) -> (n + dn, x + b + s*n) on the underlying realization.
class Environment {
 public:
  Environment() : Environment(EnvironmentConfig{0, 0.0, {}, {}, Bump::quartic}) {}

  explicit Environment(EnvironmentConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  static Environment zero() { return Environment(); }

  // Deterministic environment made of the given points only (hand-built cases).
  static Environment from_points(const std::vector<KickPoint>& points) {
    auto table = std::make_shared<PointTable>();
    for (const auto& p : points) {
      if (!(p.kappa > 0.0 && p.kappa <= 1.0)) throw Error("kappa must lie in (0, 1]");
      if (!(std::abs(p.xi) <= 1.0)) throw Error("|xi| must not exceed 1");
      (*table)[{p.tau, static_cast<std::int64_t>(std::floor(p.eta))}].push_back(p);
    }
    Environment env;
    env.fixed_ = std::move(table);
    return env;
  }

  const EnvironmentConfig& config() const { return cfg_; }
  std::int64_t time_offset() const { return dn_; }
  double space_offset() const { return b_; }
  double shear_velocity() const { return -s_; }

  // theta^{dn, dx}: F'(n, x) = F(n + dn, x + dx).
  Environment shifted(std::int64_t dn, double dx) const {
    Environment e = *this;
    e.dn_ = dn_ + dn;
    e.b_ = b_ + dx + s_ * static_cast<double>(dn);
    return e;
  }

  // L^{a, v}: points move to (tau, eta + a + v*tau), so F'(n, x + a + v n) = F(n, x).
  Environment sheared(double a, double v) const {
    Environment e = *this;
    e.b_ = b_ - a;
    e.s_ = s_ - v;
    return e;
  }

  // Points of this view with tau = n and eta in [i, i+1), eta in view coordinates.
  std::vector<KickPoint> cell_points(std::int64_t n, std::int64_t i) const {
    const std::int64_t bn = n + dn_;
    const double off = offset(n);
    std::vector<KickPoint> out;
    const auto first = static_cast<std::int64_t>(std::floor(static_cast<double>(i) + off));
    const auto last = static_cast<std::int64_t>(std::floor(static_cast<double>(i + 1) + off));
    for (std::int64_t c = first; c <= last; ++c) {
      for (const auto& p : base_cell(bn, c)) {
        const double eta = p.eta - off;
        if (eta >= static_cast<double>(i) && eta < static_cast<double>(i + 1))
          out.push_back({n, eta, p.xi, p.kappa});
      }
    }
    return out;
  }

  double potential(std::int64_t n, double x) const {
    return accumulate(n, x, [](double xi, double y, double) { return xi * QuarticBump::value(y); });
  }

  // dF/dx from the bump's closed-form derivative.
  double force(std::int64_t n, double x) const {
    return accumulate(n, x, [](double xi, double y, double kappa) {
      return xi * QuarticBump::derivative(y) / kappa;
    });
  }

  // d^2F/dx^2 (piecewise; the bump is only C^1 at the edge of its support).
  double force_derivative(std::int64_t n, double x) const {
    return accumulate(n, x, [](double xi, double y, double kappa) {
      return xi * QuarticBump::second_derivative(y) / (kappa * kappa);
    });
  }

  // max |F(n, .)| over [x, x+1]: samples at step h_f, every bump center in
  // range, and critical points bracketed by sampled local maxima (located by
  // bisection on dF/dx). A lower bound, tight to the bisection tolerance.
  double potential_max(std::int64_t n, double x, double h_f = 1.0 / 1024.0) const {
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / h_f));
    std::vector<double> ys(steps + 1), fs(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
      ys[k] = std::min(x + static_cast<double>(k) * h_f, x + 1.0);
      fs[k] = std::abs(potential(n, ys[k]));
    }
    double best = *std::max_element(fs.begin(), fs.end());
    for (std::size_t k = 1; k < steps; ++k) {
      if (fs[k] < fs[k - 1] || fs[k] < fs[k + 1] || fs[k] == 0.0) continue;
      double a = ys[k - 1], b = ys[k + 1];
      const double sign = potential(n, ys[k]) >= 0.0 ? 1.0 : -1.0;
      // maximize sign * F: derivative goes from >= 0 to <= 0 across [a, b]
      if (sign * force(n, a) < 0.0 || sign * force(n, b) > 0.0) continue;
      for (int it = 0; it < 60 && b - a > 1e-15; ++it) {
        const double m = 0.5 * (a + b);
        if (sign * force(n, m) > 0.0) a = m;
        else b = m;
      }
      best = std::max({best, std::abs(potential(n, a)), std::abs(potential(n, b))});
    }
    const auto c0 = static_cast<std::int64_t>(std::floor(x));
    for (std::int64_t c = c0; c <= c0 + 1; ++c) {
      for (const auto& p : cell_points(n, c)) {
        if (p.eta >= x && p.eta <= x + 1.0) best = std::max(best, std::abs(potential(n, p.eta)));
      }
    }
    return best;
  }

  // Lowest point of F(n, .) in each node's cell [x_i - h/2, x_i + h/2): the
  // node itself or the bottom of a well (xi < 0) centred in the cell. Wells
  // narrower than h are invisible to node sampling; this makes them visible.
  // values[i] <= sample_potential(n, grid)[i]; values are exact F evaluations.
  struct CellMinima {
    std::vector<double> values;
    std::vector<double> positions;
  };

  CellMinima cell_minima(std::int64_t n, const GridSpec& grid) const {
    CellMinima out{sample_potential(n, grid), std::vector<double>(grid.count)};
    for (std::size_t i = 0; i < grid.count; ++i) out.positions[i] = grid.x(i);
    const std::int64_t bn = n + dn_;
    const double off = offset(n);
    const auto c_first = static_cast<std::int64_t>(std::floor(grid.x(0) + off)) - 1;
    const auto c_last = static_cast<std::int64_t>(std::floor(grid.x(grid.count - 1) + off)) + 1;
    CellCache cache(*this, bn);
    for (std::int64_t c = c_first; c <= c_last; ++c) {
      for (const auto& p : cache.get(c)) {
        if (p.xi >= 0.0) continue;
        const double q = (p.eta - off - grid.x_min) / grid.h;
        if (!(q > -0.5 && q < static_cast<double>(grid.count) - 0.5)) continue;
        const auto i = static_cast<std::size_t>(std::floor(q + 0.5));
        const double half = 0.5 * grid.h;
        const auto [f, y] = well_bottom(cache, p, off, grid.x(i) - half, grid.x(i) + half);
        if (f < out.values[i]) out.values[i] = f, out.positions[i] = y;
      }
    }
    return out;
  }

  // Single-node version of cell_minima: (value, position) of the lowest point
  // among x and the wells centred in [x - half, x + half).
  std::pair<double, double> lowest_near(std::int64_t n, double x, double half) const {
    std::pair<double, double> best{potential(n, x), x};
    const std::int64_t bn = n + dn_;
    const double off = offset(n);
    CellCache cache(*this, bn);
    const auto c0 = static_cast<std::int64_t>(std::floor(x - half + off));
    const auto c1 = static_cast<std::int64_t>(std::floor(x + half + off));
    for (std::int64_t c = c0; c <= c1; ++c)
      for (const auto& p : cache.get(c)) {
        const double eta = p.eta - off;
        if (p.xi >= 0.0 || eta < x - half || eta >= x + half) continue;
        const auto cand = well_bottom(cache, p, off, x - half, x + half);
        if (cand.first < best.first) best = cand;
      }
    return best;
  }

  // F(n, x_i) on every node of the grid. Bit-identical to calling potential()
  // node by node: contributions are added in the same (cell, point) order.
  std::vector<double> sample_potential(std::int64_t n, const GridSpec& grid) const {
    std::vector<double> out(grid.count, 0.0);
    const std::int64_t bn = n + dn_;
    const double off = offset(n);
    const double bx0 = grid.x(0) + off;
    const double bx1 = grid.x(grid.count - 1) + off;
    const auto c_first = static_cast<std::int64_t>(std::floor(bx0)) - 1;
    const auto c_last = static_cast<std::int64_t>(std::floor(bx1)) + 1;
    for (std::int64_t c = c_first; c <= c_last; ++c) {
      for (const auto& p : base_cell(bn, c)) {
        // candidate nodes; the exact support test below decides membership
        const double lo = (p.eta - p.kappa - off - grid.x_min) / grid.h;
        const double hi = (p.eta + p.kappa - off - grid.x_min) / grid.h;
        if (hi < -1.0 || lo > static_cast<double>(grid.count)) continue;
        const auto i0 = static_cast<std::size_t>(std::max(0.0, std::floor(lo) - 1.0));
        const auto i1 = static_cast<std::size_t>(
            std::min(static_cast<double>(grid.count - 1), std::ceil(hi) + 1.0));
        for (std::size_t i = i0; i <= i1; ++i) {
          const double bx = grid.x(i) + off;
          const double y = (bx - p.eta) / p.kappa;
          if (std::abs(bx - p.eta) < p.kappa) out[i] += p.xi * QuarticBump::value(y);
        }
      }
    }
    return out;
  }

 private:
  using PointTable = std::map<std::pair<std::int64_t, std::int64_t>, std::vector<KickPoint>>;

  double offset(std::int64_t n) const { return b_ + s_ * static_cast<double>(n); }

  // Points of the underlying realization in {bn} x [c, c+1), base coordinates.
  std::vector<KickPoint> base_cell(std::int64_t bn, std::int64_t c) const {
    if (fixed_) {
      auto it = fixed_->find({bn, c});
      return it == fixed_->end() ? std::vector<KickPoint>{} : it->second;
    }
    std::vector<KickPoint> pts;
    if (cfg_.intensity <= 0.0) return pts;
    CellStream s(cfg_.master_seed, bn, c);
    const int count = poisson_count(cfg_.intensity, s.uniform());
    pts.reserve(static_cast<std::size_t>(count));
    const double left = static_cast<double>(c);
    for (int k = 0; k < count; ++k) {
      const double u_eta = s.uniform();
      const double u_xi = s.uniform();
      const double u_kappa = s.uniform();
      double eta = left + u_eta;
      if (eta >= left + 1.0) eta = std::nextafter(left + 1.0, left);
      pts.push_back({bn, eta, sample_xi(u_xi), sample_kappa(u_kappa)});
    }
    return pts;
  }

  // Memoized base cells of one time slice.
  class CellCache {
   public:
    CellCache(const Environment& env, std::int64_t bn) : env_(env), bn_(bn) {}
    const std::vector<KickPoint>& get(std::int64_t c) {
      auto it = cells_.find(c);
      if (it == cells_.end()) it = cells_.emplace(c, env_.base_cell(bn_, c)).first;
      return it->second;
    }

   private:
    const Environment& env_;
    std::int64_t bn_;
    std::map<std::int64_t, std::vector<KickPoint>> cells_;
  };

  // Sum of term over points covering bx; same cell and point order as
  // accumulate(), so values are bit-identical to it.
  template <class Term>
  static double accumulate_cached(CellCache& cache, double bx, Term term) {
    const auto c0 = static_cast<std::int64_t>(std::floor(bx));
    double sum = 0.0;
    for (std::int64_t c = c0 - 1; c <= c0 + 1; ++c)
      for (const auto& p : cache.get(c))
        if (std::abs(bx - p.eta) < p.kappa) sum += term(p.xi, (bx - p.eta) / p.kappa, p.kappa);
    return sum;
  }

  // Newton on dF/dx from the well centre, kept inside the well and [lo, hi]
  // (view coordinates). Returns (F, position) of the better of centre and end.
  std::pair<double, double> well_bottom(CellCache& cache, const KickPoint& p, double off, double lo, double hi) const {
    auto F = [&](double y) {
      return accumulate_cached(cache, y + off, [](double xi, double u, double) { return xi * QuarticBump::value(u); });
    };
    const double a = std::max(lo, p.eta - off - p.kappa), b = std::min(hi, p.eta - off + p.kappa);
    double y = std::clamp(p.eta - off, a, b);
    std::pair<double, double> best{F(y), y};
    for (int it = 0; it < 30; ++it) {
      const double g = accumulate_cached(
          cache, y + off, [](double xi, double u, double k) { return xi * QuarticBump::derivative(u) / k; });
      const double H = accumulate_cached(
          cache, y + off, [](double xi, double u, double k) { return xi * QuarticBump::second_derivative(u) / (k * k); });
      if (!(H > 0.0)) break;
      const double next = std::clamp(y - g / H, a, b);
      if (next == y) break;
      y = next;
    }
    const double fy = F(y);
    if (fy < best.first) best = {fy, y};
    return best;
  }

  static int poisson_count(double lambda, double u) {
    double p = std::exp(-lambda);
    double cdf = p;
    int k = 0;
    while (u >= cdf && k < 100000) {
      ++k;
      p *= lambda / k;
      cdf += p;
      if (p == 0.0 && static_cast<double>(k) > lambda) break;
    }
    return k;
  }

  double sample_xi(double u) const {
    if (cfg_.xi.kind == XiDistribution::Kind::two_point) return u < cfg_.xi.p_plus ? 1.0 : -1.0;
    return 2.0 * u - 1.0;
  }

  double sample_kappa(double u) const {
    if (cfg_.kappa.kind == KappaDistribution::Kind::fixed) return cfg_.kappa.value;
    return 1.0 - u;
  }

  template <class Term>
  double accumulate(std::int64_t n, double x, Term term) const {
    const std::int64_t bn = n + dn_;
    const double bx = x + offset(n);
    const auto c0 = static_cast<std::int64_t>(std::floor(bx));
    double sum = 0.0;
    for (std::int64_t c = c0 - 1; c <= c0 + 1; ++c) {
      for (const auto& p : base_cell(bn, c)) {
        if (std::abs(bx - p.eta) < p.kappa) sum += term(p.xi, (bx - p.eta) / p.kappa, p.kappa);
      }
    }
    return sum;
  }

  EnvironmentConfig cfg_;
  std::shared_ptr<const PointTable> fixed_;
  std::int64_t dn_ = 0;
  double b_ = 0.0;
  double s_ = 0.0;
};

}  // namespace kickwave
