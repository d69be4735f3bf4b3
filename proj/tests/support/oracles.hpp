#pragma once

// Independent oracles used by the test suites. Everything here deliberately
// avoids the library's own numerics paths: the erf series, bisection and
// quadrature routines are the reference implementations the library is
// checked against.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracles {

// Maclaurin series for erf, accurate to ~1e-15 for |x| <= 3.5.
inline double erf_series(double x) {
  const long double two_over_sqrt_pi = 1.1283791670955125738961589031215L;
  long double term = x;
  long double sum = x;
  const long double x2 = static_cast<long double>(x) * x;
  for (int n = 1; n < 200; ++n) {
    term *= -x2 / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(static_cast<double>(add)) < 1e-20) break;
  }
  return static_cast<double>(two_over_sqrt_pi * sum);
}

inline double normal_cdf_series(double v) { return 0.5 * (1.0 + erf_series(v / std::sqrt(2.0))); }

inline double normal_pdf_ref(double v) {
  return std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
}

// Bisection inverse of a monotone function.
inline double bisect(const std::function<double(double)>& f, double target, double lo, double hi,
                     int iters = 200) {
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Central finite differences of a scalar function of a parameter vector.
inline std::vector<double> central_diff(const std::function<double(std::span<const double>)>& f,
                                        std::vector<double> params, double h = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f(params);
    params[i] = keep - h;
    const double dn = f(params);
    params[i] = keep;
    g[i] = (up - dn) / (2 * h);
  }
  return g;
}

// Kolmogorov-Smirnov distance of a sample against U(0,1).
inline double ks_uniform(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    d = std::max(d, (i + 1) / n - sample[i]);
    d = std::max(d, sample[i] - i / n);
  }
  return d;
}

// Large-sample 5% critical value of the KS statistic.
inline double ks_critical_5pct(std::size_t n) { return 1.358 / std::sqrt(static_cast<double>(n)); }

// Composite Simpson integration on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracles
