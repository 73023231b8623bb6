#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "kickwave/error.hpp"

namespace kickwave {

// Uniform spatial grid x_i = x_min + i*h, i = 0..count-1.
struct GridSpec {
  double x_min = 0.0;
  double h = 1.0 / 64.0;
  std::size_t count = 2;

  double x(std::size_t i) const { return x_min + static_cast<double>(i) * h; }
  double x_max() const { return x(count - 1); }

  void validate() const {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error("grid step must be positive");
    if (count < 2) throw Error("grid needs at least two nodes");
    if (!std::isfinite(x_min)) throw Error("grid origin must be finite");
  }

  // Index of the node sitting exactly at x, if any.
  std::optional<std::size_t> node_at(double xv) const {
    const double r = (xv - x_min) / h;
    const double k = std::round(r);
    if (k < 0.0 || k > static_cast<double>(count - 1)) return std::nullopt;
    const auto i = static_cast<std::size_t>(k);
    if (x(i) != xv) return std::nullopt;
    return i;
  }

  // Node within rounding of x (|x_i - x| <= 1e-9 h), for anchors that are not
  // exactly representable as x_min + i h.
  std::optional<std::size_t> node_near(double xv) const {
    if (auto i = node_at(xv)) return i;
    const std::size_t i = nearest(xv);
    if (std::abs(x(i) - xv) <= 1e-9 * h) return i;
    return std::nullopt;
  }

  // Nearest node to x, clamped to the grid.
  std::size_t nearest(double xv) const {
    const double k = std::round((xv - x_min) / h);
    if (k <= 0.0) return 0;
    if (k >= static_cast<double>(count - 1)) return count - 1;
    return static_cast<std::size_t>(k);
  }

  bool operator==(const GridSpec&) const = default;

  // Grid with a node at `anchor` covering [anchor - left, anchor + right].
  static GridSpec around(double anchor, double left, double right, double h) {
    const auto nl = static_cast<std::size_t>(std::ceil(left / h));
    const auto nr = static_cast<std::size_t>(std::ceil(right / h));
    GridSpec g{anchor - static_cast<double>(nl) * h, h, nl + nr + 1};
    g.validate();
    return g;
  }
};

// Potential or velocity sampled on a grid at one time. Nodes in [lo, hi]
// are trusted: their values do not depend on the truncation of the line.
struct GridProfile {
  GridSpec grid;
  std::int64_t time = 0;
  std::vector<double> values;
  std::size_t lo = 0;
  std::size_t hi = 0;

  GridProfile() = default;
  GridProfile(GridSpec g, std::int64_t t, std::vector<double> v)
      : grid(g), time(t), values(std::move(v)), lo(0), hi(values.empty() ? 0 : values.size() - 1) {
    if (values.size() != grid.count) throw Error("profile size does not match its grid");
  }

  std::size_t size() const { return values.size(); }
  double x(std::size_t i) const { return grid.x(i); }
  bool trusted(std::size_t i) const { return i >= lo && i <= hi && lo <= hi; }
  bool trusted_empty() const { return lo > hi; }
};

}  // namespace kickwave
