#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kickwave/error.hpp"

namespace kickwave {

// Pairwise summation in a fixed order: the result depends only on the input sequence.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;      // sample standard deviation (n - 1)
  double se = 0.0;  // standard error sd / sqrt(n)
};

inline Summary summarize(std::span<const double> x) {
  Summary s;
  s.count = x.size();
  if (x.empty()) return s;
  s.mean = pairwise_sum(x) / static_cast<double>(x.size());
  if (x.size() < 2) return s;
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - s.mean) * (x[i] - s.mean);
  s.sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(x.size() - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(x.size()));
  return s;
}

inline double t_quantile(double prob, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), prob);
}

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double ci_lo = 0.0;  // two-sided confidence interval for the slope
  double ci_hi = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares y = a + b x with a Student-t interval for b.
inline LinearFit ols_fit(std::span<const double> x, std::span<const double> y, double level = 0.95) {
  if (x.size() != y.size()) throw Error("fit inputs differ in length");
  if (x.size() < 3) throw Error("fit needs at least three points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error("fit needs distinct abscissae");
  LinearFit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  f.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  const double t = t_quantile(0.5 + level / 2.0, n - 2.0);
  f.ci_lo = f.slope - t * f.slope_stderr;
  f.ci_hi = f.slope + t * f.slope_stderr;
  return f;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
// distribution at effective size n1 n2 / (n1 + n2) (Stephens' correction).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error("KS test needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult r;
  r.statistic = d;
  const double ne = na * nb / (na + nb);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  if (lambda < 0.2) return r;  // series converges slowly there; p is 1 to double precision
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  r.p_value = std::clamp(sum, 0.0, 1.0);
  return r;
}

}  // namespace kickwave
