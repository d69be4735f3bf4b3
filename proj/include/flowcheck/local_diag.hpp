#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "flowcheck/dataset.hpp"
#include "flowcheck/grid.hpp"
#include "flowcheck/pit.hpp"
#include "flowcheck/regress.hpp"

namespace flowcheck {

// The m x |G| indicator datasets D_{i,alpha}: shared features x_n and binary
// targets W_n = I{P_i(n) <= alpha_k}. Targets are monotone in alpha by
// construction.
struct IndicatorDatasets {
  Matrix features;  // N x d
  AlphaGrid grid;
  int m = 0;
  std::vector<std::uint8_t> w;  // [i][k][n]

  std::uint8_t target(int i, int k, int n) const {
    return w[(static_cast<std::size_t>(i) * grid.size() + k) * features.rows() + n];
  }
  std::vector<std::uint8_t> targets(int i, int k) const {
    auto base = (static_cast<std::size_t>(i) * grid.size() + k) * features.rows();
    return {w.begin() + base, w.begin() + base + features.rows()};
  }
};

IndicatorDatasets build_indicator_datasets(const PitMatrix& pit, const CalibrationDataset& data,
                                           const AlphaGrid& grid);

// Observed regressors for every (covariate, alpha) plus B null replicates
// trained on synthetic-uniform targets. One replicate draws a single fresh
// uniform vector shared across covariates (the per-covariate null constrains
// each covariate marginally), so the null store is B x |G| with an m-indexed
// view. Null replicate seeds are recorded.
struct RegressorBank {
  int m = 0, B = 0;
  AlphaGrid grid;
  RegressorConfig cfg;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> null_seeds;       // per replicate
  std::vector<BinaryRegressor> observed;       // m * |G|
  std::vector<BinaryRegressor> nulls;          // B * |G|
  int degenerate_observed = 0, degenerate_null = 0;

  const BinaryRegressor& obs(int i, int k) const {
    return observed[static_cast<std::size_t>(i) * grid.size() + k];
  }
  const BinaryRegressor& null_reg(int b, int /*i*/, int k) const {
    return nulls[static_cast<std::size_t>(b) * grid.size() + k];
  }
};

RegressorBank fit_bank(const IndicatorDatasets& ds, const RegressorConfig& cfg, int B,
                       std::uint64_t seed);

// T_i(x) = (1/|G|) sum_k (r_hat_{i,alpha_k}(x) - alpha_k)^2 for every covariate.
Vector local_statistic(const RegressorBank& bank, const Vector& x, const AlphaGrid& grid);

struct LocalReport {
  Vector x;
  AlphaGrid grid;
  Vector stats;             // T_i(x)
  Vector p_raw, p_adj;      // empty when the bank has no null replicates
  bool has_pvalues = false;
  bool reject = false;
  double level = 0.05;
  Matrix curves;            // m x |G| local coverage r_hat_{i,alpha}(x)
  Vector band_lo, band_hi;  // per alpha, from null-bank curves at x
};

LocalReport local_test(const RegressorBank& bank, const Vector& x, const AlphaGrid& grid,
                       double level);

// Local tests along a path of evaluation points. With B = 0 the reports carry
// statistics and curves only.
std::vector<LocalReport> sweep(const RegressorBank& bank, const Matrix& points,
                               const AlphaGrid& grid, double level);

// Columnar sweep file: path coordinates, T_1..T_m, then p and adjusted p when
// available.
void emit_sweep(const std::vector<LocalReport>& reports, const Matrix& points,
                const std::filesystem::path& path);

// Per-point PP-plot data files (alpha, r_hat, band_lo, band_hi per covariate).
void emit_local_ppplot(const LocalReport& report, const std::filesystem::path& dir);

}  // namespace flowcheck
