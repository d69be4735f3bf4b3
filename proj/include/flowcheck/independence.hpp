#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcheck/matrix.hpp"

namespace flowcheck {

// Identity-covariance check of the normal scores: the second condition of the
// local-consistency characterization, tested globally or over a k-nearest
// neighborhood in x-space. Acceptance is a necessary condition only; see the
// caveat string carried by every report.
struct CovarianceReport {
  Matrix sigma;        // empirical covariance of the scores
  double stat = 0.0;   // squared Frobenius distance to the identity
  double p = 1.0;
  int n = 0;
  std::string mode;    // "global" or "local k=<k>"
  std::vector<std::string> warnings;
  std::string caveat;
};

inline constexpr const char* kIndependenceCaveat =
    "identity covariance - necessary condition given per-covariate normality";

// Null distribution: B draws of n iid standard-normal m-vectors through the
// same covariance estimator. uniformity_ok = false only adds a warning; the
// test still runs.
CovarianceReport global_independence(const Matrix& z, int B, std::uint64_t seed,
                                     bool uniformity_ok = true);

// Covariance over the k nearest calibration points to x0 (Euclidean in
// standardized x-space); null by fresh iid normal samples of size k.
CovarianceReport local_independence(const Matrix& z, const Matrix& x, const Vector& x0, int k,
                                    int B, std::uint64_t seed);

// Centered empirical covariance with the unbiased 1/(n-1) divisor.
Matrix sample_covariance(const Matrix& z);

}  // namespace flowcheck
