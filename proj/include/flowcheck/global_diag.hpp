#pragma once

#include <cstdint>
#include <filesystem>

#include "flowcheck/dataset.hpp"
#include "flowcheck/flow.hpp"
#include "flowcheck/grid.hpp"
#include "flowcheck/pit.hpp"

namespace flowcheck {

// Global uniformity check of each PIT covariate: ECDF curves on the alpha
// grid, a mean-squared-deviation statistic per covariate, Monte-Carlo
// p-values from simulated iid-uniform nulls, and pointwise confidence bands
// at the Bonferroni-adjusted level.
struct GlobalReport {
  AlphaGrid grid;
  Matrix curves;              // m x |G| empirical coverage
  Vector band_lo, band_hi;    // per alpha; nulls are shared across covariates
  Vector stats;               // per covariate
  Vector p_raw, p_adj;        // p_adj = min(1, m * p_raw)
  bool reject = false;        // any adjusted p below the level
  double level = 0.05;
  int n = 0, b_replicates = 0;
  std::uint64_t seed = 0;
};

// curve[i][k] = (1/N) sum_n I{P_i(n) <= alpha_k}
Matrix global_ecdf(const PitMatrix& pit, const AlphaGrid& grid);

// One covariate's statistic: mean over the grid of (coverage - alpha)^2.
double coverage_statistic(std::span<const double> curve, const AlphaGrid& grid);

GlobalReport global_test(const PitMatrix& pit, const AlphaGrid& grid, double level, int B,
                         std::uint64_t seed);

// One PP-plot data file per covariate (alpha, r_hat, band_lo, band_hi);
// re-emission of the same report is byte-identical.
void emit_ppplot(const GlobalReport& report, const std::filesystem::path& dir);

// Monte-Carlo p-value with the +1 correction: (1 + #{null >= observed})/(B+1).
double mc_pvalue(double observed, std::span<const double> nulls);

// min(1, m*p)
Vector bonferroni_adjust(const Vector& p_raw);

// Deterministic linearly-interpolated empirical quantile (expects q in [0,1]).
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace flowcheck
