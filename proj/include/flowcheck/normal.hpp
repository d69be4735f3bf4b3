#pragma once

namespace flowcheck {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Standard-normal CDF, strictly inside (0,1). Throws std::invalid_argument on
// non-finite input. Absolute error well below 1e-12.
double normal_cdf(double v);

// Standard-normal quantile for u in (0,1): rational initial guess refined by
// Newton steps on normal_cdf. Throws std::domain_error outside (0,1).
double normal_quantile(double u);

double normal_logpdf(double v);
double normal_pdf(double v);

}  // namespace flowcheck
