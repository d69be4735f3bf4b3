#include "flowcheck/independence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowcheck/errors.hpp"
#include "flowcheck/global_diag.hpp"
#include "flowcheck/parallel.hpp"
#include "flowcheck/rng.hpp"

namespace flowcheck {

Matrix sample_covariance(const Matrix& z) {
  const int n = z.rows(), m = z.cols();
  if (n < 2) throw ContractError("sample_covariance: need at least two rows");
  Vector mean(m, 0.0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < m; ++c) mean[c] += z(r, c);
  for (double& v : mean) v /= n;
  Matrix cov(m, m);
  for (int r = 0; r < n; ++r)
    for (int a = 0; a < m; ++a) {
      const double da = z(r, a) - mean[a];
      for (int b = a; b < m; ++b) cov(a, b) += da * (z(r, b) - mean[b]);
    }
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) {
      cov(a, b) /= (n - 1);
      cov(b, a) = cov(a, b);
    }
  return cov;
}

namespace {

double frobenius_to_identity(const Matrix& cov) {
  double s = 0.0;
  for (int a = 0; a < cov.rows(); ++a)
    for (int b = 0; b < cov.cols(); ++b) {
      const double dev = cov(a, b) - (a == b ? 1.0 : 0.0);
      s += dev * dev;
    }
  return s;
}

Vector null_statistics(int n, int m, int B, std::uint64_t seed) {
  Vector stats(B);
  parallel_for(B, [&](std::size_t b) {
    RngStream rng(seed, 4000 + b);
    Matrix z(n, m);
    for (double& v : z.data()) v = rng.normal();
    stats[b] = frobenius_to_identity(sample_covariance(z));
  });
  return stats;
}

}  // namespace

CovarianceReport global_independence(const Matrix& z, int B, std::uint64_t seed,
                                     bool uniformity_ok) {
  const int n = z.rows(), m = z.cols();
  if (n < m) throw ContractError("global_independence: fewer rows than score dimensions");
  if (B < 1) throw ConfigError("global_independence: need at least one null replicate");
  require_finite(z.data(), "global_independence scores");

  CovarianceReport rep;
  rep.mode = "global";
  rep.n = n;
  rep.caveat = kIndependenceCaveat;
  if (!uniformity_ok)
    rep.warnings.push_back(
        "per-covariate uniformity was rejected upstream; the covariance check assumes "
        "normal marginals and its level is not interpretable here");
  if (n < 10 * m)
    rep.warnings.push_back("sample is small for a covariance test (n < 10m)");
  rep.sigma = sample_covariance(z);
  rep.stat = frobenius_to_identity(rep.sigma);
  rep.p = mc_pvalue(rep.stat, null_statistics(n, m, B, seed));
  return rep;
}

CovarianceReport local_independence(const Matrix& z, const Matrix& x, const Vector& x0, int k,
                                    int B, std::uint64_t seed) {
  const int n = z.rows(), m = z.cols();
  require_dim(x.rows(), n, "local_independence x rows");
  require_dim(x0.size(), x.cols(), "local_independence x0");
  if (k > n) throw ContractError("local_independence: k exceeds the calibration size");
  if (k < m) throw ContractError("local_independence: k below score dimension");
  require_finite(x0, "local_independence x0");

  // standardize x columns, then rank by Euclidean distance to x0
  const int d = x.cols();
  Vector mean(d, 0.0), inv_sd(d, 1.0);
  for (int c = 0; c < d; ++c) {
    double mu = 0.0;
    for (int r = 0; r < n; ++r) mu += x(r, c);
    mu /= n;
    double var = 0.0;
    for (int r = 0; r < n; ++r) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= n;
    mean[c] = mu;
    inv_sd[c] = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
  }
  std::vector<std::pair<double, int>> dist(n);
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double dv = (x(r, c) - x0[c]) * inv_sd[c];
      s += dv * dv;
    }
    dist[r] = {s, r};
  }
  std::nth_element(dist.begin(), dist.begin() + k, dist.end());
  std::sort(dist.begin(), dist.begin() + k,
            [](const auto& a, const auto& b) { return a.second < b.second; });

  Matrix zk(k, m);
  long duplicate_rows = 0;
  for (int i = 0; i < k; ++i) {
    const int r = dist[i].second;
    for (int c = 0; c < m; ++c) zk(i, c) = z(r, c);
    if (i > 0) {
      const int prev = dist[i - 1].second;
      bool same = true;
      for (int c = 0; c < d && same; ++c) same = x(r, c) == x(prev, c);
      if (same) ++duplicate_rows;
    }
  }

  CovarianceReport rep;
  rep.mode = "local k=" + std::to_string(k);
  rep.n = k;
  rep.caveat = kIndependenceCaveat;
  if (k < 10 * m) rep.warnings.push_back("neighborhood is small for a covariance test (k < 10m)");
  if (duplicate_rows > 0)
    rep.warnings.push_back("neighborhood contains " + std::to_string(duplicate_rows) +
                           " duplicate x rows; effective diversity is reduced");
  rep.sigma = sample_covariance(zk);
  rep.stat = frobenius_to_identity(rep.sigma);
  rep.p = mc_pvalue(rep.stat, null_statistics(k, m, B, seed));
  return rep;
}

}  // namespace flowcheck
