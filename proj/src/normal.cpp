#include "flowcheck/normal.hpp"

#include <cfloat>
#include <cmath>
#include <stdexcept>

namespace flowcheck {

namespace {
constexpr double kSqrt1_2 = 0.70710678118654752440084436210485;
constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;
}  // namespace

double normal_cdf(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("normal_cdf: non-finite input");
  double p = 0.5 * std::erfc(-v * kSqrt1_2);
  // keep the value strictly inside (0,1) so downstream quantile calls stay valid
  if (p <= 0.0) p = DBL_TRUE_MIN;
  if (p >= 1.0) p = 1.0 - DBL_EPSILON / 2;
  return p;
}

double normal_pdf(double v) { return std::exp(-0.5 * v * v) / kSqrt2Pi; }

double normal_logpdf(double v) { return -0.5 * v * v - 0.5 * kLog2Pi; }

namespace {

// Rational approximation due to Acklam; |relative error| < 1.15e-9 over (0,1).
double quantile_initial(double u) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;

  if (u < plow) {
    double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = u - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("normal_quantile: input outside (0,1)");
  double x = quantile_initial(u);
  for (int it = 0; it < 2; ++it) {
    double pdf = normal_pdf(x);
    if (pdf < 1e-280) break;  // deep tail: the initial guess is already as good as it gets
    x -= (normal_cdf(x) - u) / pdf;
  }
  return x;
}

}  // namespace flowcheck
