#include "flowcheck/local_diag.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowcheck/global_diag.hpp"
#include "flowcheck/parallel.hpp"
#include "flowcheck/rng.hpp"

namespace flowcheck {

IndicatorDatasets build_indicator_datasets(const PitMatrix& pit, const CalibrationDataset& data,
                                           const AlphaGrid& grid) {
  grid.validate();
  require_dim(data.n(), pit.n(), "build_indicator_datasets rows");
  IndicatorDatasets ds;
  ds.features = data.x;
  ds.grid = grid;
  ds.m = pit.m();
  const int n = pit.n();
  const int G = grid.size();
  ds.w.assign(static_cast<std::size_t>(ds.m) * G * n, 0);
  for (int i = 0; i < ds.m; ++i)
    for (int k = 0; k < G; ++k) {
      const double alpha = grid.alphas[k];
      auto base = (static_cast<std::size_t>(i) * G + k) * n;
      for (int r = 0; r < n; ++r) ds.w[base + r] = pit.values(r, i) <= alpha ? 1 : 0;
    }
  return ds;
}

RegressorBank fit_bank(const IndicatorDatasets& ds, const RegressorConfig& cfg, int B,
                       std::uint64_t seed) {
  cfg.validate();
  if (B < 0) throw ContractError("fit_bank: B must be non-negative");
  require_finite(ds.features.data(), "fit_bank features");

  RegressorBank bank;
  bank.m = ds.m;
  bank.B = B;
  bank.grid = ds.grid;
  bank.cfg = cfg;
  bank.seed = seed;
  const int G = ds.grid.size();
  const int n = ds.features.rows();

  bank.observed.resize(static_cast<std::size_t>(ds.m) * G);
  std::atomic<int> degenerate_obs{0};
  parallel_for(bank.observed.size(), [&](std::size_t job) {
    const int i = static_cast<int>(job) / G;
    const int k = static_cast<int>(job) % G;
    RegressorConfig c = cfg;
    c.seed = RngStream(seed, 100000 + job).next_u64();
    bank.observed[job] = BinaryRegressor::fit(ds.features, ds.targets(i, k), c);
    if (bank.observed[job].degenerate()) ++degenerate_obs;
  });
  bank.degenerate_observed = degenerate_obs.load();

  // null replicates: fresh uniforms per replicate, shared across covariates
  bank.null_seeds.resize(B);
  for (int b = 0; b < B; ++b) bank.null_seeds[b] = RngStream(seed, 200000 + b).next_u64();
  bank.nulls.resize(static_cast<std::size_t>(B) * G);
  std::atomic<int> degenerate_null{0};
  parallel_for(B, [&](std::size_t b) {
    RngStream rng(bank.null_seeds[b], 0);
    const Vector u = rng.u01_vector(n);
    std::vector<std::uint8_t> w(n);
    for (int k = 0; k < G; ++k) {
      const double alpha = ds.grid.alphas[k];
      for (int r = 0; r < n; ++r) w[r] = u[r] <= alpha ? 1 : 0;
      RegressorConfig c = cfg;
      c.seed = RngStream(bank.null_seeds[b], 1 + k).next_u64();
      bank.nulls[b * G + k] = BinaryRegressor::fit(ds.features, w, c);
      if (bank.nulls[b * G + k].degenerate()) ++degenerate_null;
    }
  });
  bank.degenerate_null = degenerate_null.load();
  return bank;
}

namespace {

void require_same_grid(const RegressorBank& bank, const AlphaGrid& grid) {
  if (bank.grid.size() != grid.size() ||
      !std::equal(bank.grid.alphas.begin(), bank.grid.alphas.end(), grid.alphas.begin()))
    throw ContractError("alpha grid does not match the grid the bank was fitted on");
}

// local coverage curve of one regressor family at x
Vector bank_curve(const std::vector<BinaryRegressor>& regs, std::size_t base, int G,
                  const Vector& x) {
  Vector curve(G);
  for (int k = 0; k < G; ++k) curve[k] = regs[base + k].predict_proba(x);
  return curve;
}

}  // namespace

Vector local_statistic(const RegressorBank& bank, const Vector& x, const AlphaGrid& grid) {
  require_same_grid(bank, grid);
  require_finite(x, "local_statistic x");
  const int G = grid.size();
  Vector stats(bank.m);
  for (int i = 0; i < bank.m; ++i) {
    Vector curve = bank_curve(bank.observed, static_cast<std::size_t>(i) * G, G, x);
    stats[i] = coverage_statistic(curve, grid);
  }
  return stats;
}

LocalReport local_test(const RegressorBank& bank, const Vector& x, const AlphaGrid& grid,
                       double level) {
  require_same_grid(bank, grid);
  if (!(level > 0.0 && level < 1.0)) throw ContractError("local_test: level outside (0,1)");
  const double needed = bank.m / level - 1.0;
  if (bank.B < needed)
    throw ConfigError("local_test: B = " + std::to_string(bank.B) +
                      " is insufficient; the smallest adjusted p-value m/(B+1) cannot fall below "
                      "the level — need B >= " +
                      std::to_string(static_cast<long>(std::ceil(needed))));

  LocalReport rep;
  rep.x = x;
  rep.grid = grid;
  rep.level = level;
  const int G = grid.size();
  rep.stats = local_statistic(bank, x, grid);
  rep.curves = Matrix(bank.m, G);
  for (int i = 0; i < bank.m; ++i) {
    Vector curve = bank_curve(bank.observed, static_cast<std::size_t>(i) * G, G, x);
    for (int k = 0; k < G; ++k) rep.curves(i, k) = curve[k];
  }

  // null statistics and curves at this x (identical for every covariate)
  Matrix null_curves(bank.B, G);
  Vector null_stats(bank.B);
  for (int b = 0; b < bank.B; ++b) {
    Vector curve = bank_curve(bank.nulls, static_cast<std::size_t>(b) * G, G, x);
    for (int k = 0; k < G; ++k) null_curves(b, k) = curve[k];
    null_stats[b] = coverage_statistic(curve, grid);
  }

  rep.p_raw.resize(bank.m);
  for (int i = 0; i < bank.m; ++i) rep.p_raw[i] = mc_pvalue(rep.stats[i], null_stats);
  rep.p_adj = bonferroni_adjust(rep.p_raw);
  rep.has_pvalues = true;
  for (double p : rep.p_adj) rep.reject = rep.reject || p < level;

  const double lam = level / bank.m;
  rep.band_lo.resize(G);
  rep.band_hi.resize(G);
  Vector column(bank.B);
  for (int k = 0; k < G; ++k) {
    for (int b = 0; b < bank.B; ++b) column[b] = null_curves(b, k);
    std::sort(column.begin(), column.end());
    rep.band_lo[k] = sorted_quantile(column, lam / 2);
    rep.band_hi[k] = sorted_quantile(column, 1.0 - lam / 2);
  }
  return rep;
}

std::vector<LocalReport> sweep(const RegressorBank& bank, const Matrix& points,
                               const AlphaGrid& grid, double level) {
  require_same_grid(bank, grid);
  std::vector<LocalReport> reports(points.rows());
  parallel_for(points.rows(), [&](std::size_t r) {
    const Vector x = points.row_vector(static_cast<int>(r));
    if (bank.B > 0) {
      reports[r] = local_test(bank, x, grid, level);
    } else {
      // statistics-only sweep: no null bank, no p-values, no bands
      LocalReport rep;
      rep.x = x;
      rep.grid = grid;
      rep.level = level;
      rep.stats = local_statistic(bank, x, grid);
      rep.curves = Matrix(bank.m, grid.size());
      for (int i = 0; i < bank.m; ++i)
        for (int k = 0; k < grid.size(); ++k)
          rep.curves(i, k) = bank.obs(i, k).predict_proba(x);
      reports[r] = std::move(rep);
    }
  });
  return reports;
}

void emit_sweep(const std::vector<LocalReport>& reports, const Matrix& points,
                const std::filesystem::path& path) {
  require_dim(reports.size(), points.rows(), "emit_sweep");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open sweep file for writing: " + path.string());
  const int m = reports.empty() ? 0 : static_cast<int>(reports[0].stats.size());
  const bool with_p = !reports.empty() && reports[0].has_pvalues;
  for (int c = 0; c < points.cols(); ++c) out << "x_" << (c + 1) << ",";
  for (int i = 0; i < m; ++i) out << "T_" << (i + 1) << (i + 1 < m || with_p ? "," : "\n");
  if (with_p) {
    for (int i = 0; i < m; ++i) out << "p_" << (i + 1) << ",";
    for (int i = 0; i < m; ++i) out << "p_adj_" << (i + 1) << (i + 1 < m ? "," : "\n");
  }
  char buf[40];
  auto cell = [&](double v, bool last) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << (last ? "\n" : ",");
  };
  for (std::size_t r = 0; r < reports.size(); ++r) {
    for (int c = 0; c < points.cols(); ++c) cell(points(static_cast<int>(r), c), false);
    for (int i = 0; i < m; ++i) cell(reports[r].stats[i], !with_p && i + 1 == m);
    if (with_p) {
      for (int i = 0; i < m; ++i) cell(reports[r].p_raw[i], false);
      for (int i = 0; i < m; ++i) cell(reports[r].p_adj[i], i + 1 == m);
    }
  }
}

void emit_local_ppplot(const LocalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char buf[40];
  const int G = report.curves.cols();
  const bool with_bands = !report.band_lo.empty();
  auto cell = [&](std::ofstream& out, double v, bool last) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << (last ? "\n" : ",");
  };
  for (int i = 0; i < report.curves.rows(); ++i) {
    const auto path = dir / ("ppplot_p" + std::to_string(i + 1) + ".csv");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open PP-plot file for writing: " + path.string());
    out << (with_bands ? "alpha,r_hat,band_lo,band_hi\n" : "alpha,r_hat\n");
    for (int k = 0; k < G; ++k) {
      cell(out, report.grid.alphas[k], false);
      cell(out, report.curves(i, k), !with_bands);
      if (with_bands) {
        cell(out, report.band_lo[k], false);
        cell(out, report.band_hi[k], true);
      }
    }
  }
}

}  // namespace flowcheck
