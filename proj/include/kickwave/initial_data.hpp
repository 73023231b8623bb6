#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "kickwave/error.hpp"
#include "kickwave/grid.hpp"

namespace kickwave {

// liminf / limsup of W(x)/x as x -> -inf (minus) and x -> +inf (plus).
struct AsymptoticSlopes {
  double liminf_minus = 0.0;
  double limsup_minus = 0.0;
  double liminf_plus = 0.0;
  double limsup_plus = 0.0;

  bool has_limit_minus() const { return liminf_minus == limsup_minus; }
  bool has_limit_plus() const { return liminf_plus == limsup_plus; }
};

// Analytic initial potentials W. All forms are locally Lipschitz with at most
// linear decay, i.e. members of the potential space the dynamics acts on.
class InitialPotential {
 public:
  struct Zero {};
  struct Linear {
    double v = 0.0;
  };
  // Continuous piecewise-linear W with W(0) = 0: slope slopes[j] between
  // breaks[j-1] and breaks[j] (slopes.size() == breaks.size() + 1).
  struct PiecewiseLinear {
    std::vector<double> breaks;
    std::vector<double> slopes;
  };
  struct Quadratic {
    double c = 1.0;  // W = c x^2 / 2
  };
  // Two-slope base plus a bounded periodic perturbation.
  struct Perturbed {
    double v_minus = 0.0;
    double v_plus = 0.0;
    double amplitude = 0.0;
    double period = 1.0;
  };
  // W(x) = x (c + d sin(ln(1 + |x|))) with (c, d) chosen per side, so W/x
  // oscillates in [c - |d|, c + |d|] without a limit when d != 0.
  struct Oscillating {
    double c_minus = 0.0;
    double d_minus = 0.0;
    double c_plus = 0.0;
    double d_plus = 0.0;
  };

  using Form = std::variant<Zero, Linear, PiecewiseLinear, Quadratic, Perturbed, Oscillating>;

  InitialPotential() : form_(Zero{}) {}
  explicit InitialPotential(Form f) : form_(std::move(f)) { validate(); }

  static InitialPotential zero() { return InitialPotential(Zero{}); }
  static InitialPotential linear(double v) { return InitialPotential(Linear{v}); }
  static InitialPotential two_slope(double v_minus, double v_plus) {
    return InitialPotential(PiecewiseLinear{{0.0}, {v_minus, v_plus}});
  }
  static InitialPotential piecewise_linear(std::vector<double> breaks, std::vector<double> slopes) {
    return InitialPotential(PiecewiseLinear{std::move(breaks), std::move(slopes)});
  }
  static InitialPotential quadratic(double c) { return InitialPotential(Quadratic{c}); }

  const Form& form() const { return form_; }

  std::string kind() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Zero>) return "zero";
          else if constexpr (std::is_same_v<T, Linear>) return "linear";
          else if constexpr (std::is_same_v<T, PiecewiseLinear>) return "piecewise_linear";
          else if constexpr (std::is_same_v<T, Quadratic>) return "quadratic";
          else if constexpr (std::is_same_v<T, Perturbed>) return "perturbed";
          else return "oscillating";
        },
        form_);
  }

  double value(double x) const {
    return std::visit([x](const auto& f) { return eval(f, x, 0); }, form_);
  }
  // Right derivative.
  double slope(double x) const {
    return std::visit([x](const auto& f) { return eval(f, x, 1); }, form_);
  }
  double curvature(double x) const {
    return std::visit([x](const auto& f) { return eval(f, x, 2); }, form_);
  }

  AsymptoticSlopes asymptotic_slopes() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& f) -> AsymptoticSlopes {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, Zero>) {
            return {0, 0, 0, 0};
          } else if constexpr (std::is_same_v<T, Linear>) {
            return {f.v, f.v, f.v, f.v};
          } else if constexpr (std::is_same_v<T, PiecewiseLinear>) {
            const double a = f.slopes.front(), b = f.slopes.back();
            return {a, a, b, b};
          } else if constexpr (std::is_same_v<T, Quadratic>) {
            if (f.c == 0.0) return {0, 0, 0, 0};
            const double s = f.c > 0.0 ? inf : -inf;
            return {-s, -s, s, s};
          } else if constexpr (std::is_same_v<T, Perturbed>) {
            return {f.v_minus, f.v_minus, f.v_plus, f.v_plus};
          } else {
            return {f.c_minus - std::abs(f.d_minus), f.c_minus + std::abs(f.d_minus),
                    f.c_plus - std::abs(f.d_plus), f.c_plus + std::abs(f.d_plus)};
          }
        },
        form_);
  }

  GridProfile sample(const GridSpec& grid, std::int64_t time) const {
    std::vector<double> v(grid.count);
    for (std::size_t i = 0; i < grid.count; ++i) v[i] = value(grid.x(i));
    return GridProfile(grid, time, std::move(v));
  }

 private:
  void validate() const {
    if (const auto* pl = std::get_if<PiecewiseLinear>(&form_)) {
      if (pl->slopes.size() != pl->breaks.size() + 1)
        throw Error("piecewise-linear potential needs one more slope than breaks");
      if (!std::is_sorted(pl->breaks.begin(), pl->breaks.end()))
        throw Error("piecewise-linear breaks must be sorted");
    }
    if (const auto* pt = std::get_if<Perturbed>(&form_)) {
      if (!(pt->period > 0.0)) throw Error("perturbation period must be positive");
    }
  }

  static double eval(const Zero&, double, int) { return 0.0; }

  static double eval(const Linear& f, double x, int order) {
    return order == 0 ? f.v * x : order == 1 ? f.v : 0.0;
  }

  static double eval(const PiecewiseLinear& f, double x, int order) {
    if (order == 2) return 0.0;
    // segment index of x: number of breaks <= x
    const auto seg = static_cast<std::size_t>(
        std::upper_bound(f.breaks.begin(), f.breaks.end(), x) - f.breaks.begin());
    if (order == 1) return f.slopes[seg];
    // W(x) = integral from 0 to x of the slope function
    return integral(f, x) - integral(f, 0.0);
  }

  // Integral of the slope function from breaks.front() (or 0 if none) to x.
  static double integral(const PiecewiseLinear& f, double x) {
    if (f.breaks.empty()) return f.slopes[0] * x;
    const double base = f.breaks.front();
    if (x <= base) return f.slopes[0] * (x - base);
    double acc = 0.0;
    for (std::size_t j = 0; j < f.breaks.size(); ++j) {
      const double left = f.breaks[j];
      const double right = j + 1 < f.breaks.size() ? f.breaks[j + 1] : x;
      if (x <= left) break;
      acc += f.slopes[j + 1] * (std::min(x, right) - left);
      if (x <= right) break;
    }
    return acc;
  }

  static double eval(const Quadratic& f, double x, int order) {
    return order == 0 ? 0.5 * f.c * x * x : order == 1 ? f.c * x : f.c;
  }

  static double eval(const Perturbed& f, double x, int order) {
    const double w = 2.0 * std::numbers::pi / f.period;
    const double base_slope = x < 0.0 ? f.v_minus : f.v_plus;
    switch (order) {
      case 0: return base_slope * x + f.amplitude * std::sin(w * x);
      case 1: return base_slope + f.amplitude * w * std::cos(w * x);
      default: return -f.amplitude * w * w * std::sin(w * x);
    }
  }

  static double eval(const Oscillating& f, double x, int order) {
    const double c = x < 0.0 ? f.c_minus : f.c_plus;
    const double d = x < 0.0 ? f.d_minus : f.d_plus;
    const double ax = std::abs(x);
    const double l = std::log1p(ax);
    const double sgn = x < 0.0 ? -1.0 : 1.0;
    // g(x) = c + d sin(l), l = ln(1+|x|); W = x g
    const double g = c + d * std::sin(l);
    const double dl = sgn / (1.0 + ax);
    const double dg = d * std::cos(l) * dl;
    if (order == 0) return x * g;
    if (order == 1) return g + x * dg;
    const double d2l = -1.0 / ((1.0 + ax) * (1.0 + ax));
    const double d2g = d * (-std::sin(l) * dl * dl + std::cos(l) * d2l);
    return 2.0 * dg + x * d2g;
  }

  Form form_;
};

}  // namespace kickwave
