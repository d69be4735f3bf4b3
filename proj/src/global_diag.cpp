#include "flowcheck/global_diag.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowcheck/parallel.hpp"
#include "flowcheck/rng.hpp"

namespace flowcheck {

namespace {

// coverage curve of one sorted sample over the grid
void ecdf_curve(Vector sorted, const AlphaGrid& grid, std::span<double> out) {
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  for (int k = 0; k < grid.size(); ++k) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), grid.alphas[k]);
    out[k] = static_cast<double>(it - sorted.begin()) / n;
  }
}

}  // namespace

double mc_pvalue(double observed, std::span<const double> nulls) {
  long count = 0;
  for (double s : nulls)
    if (s >= observed) ++count;
  return static_cast<double>(1 + count) / static_cast<double>(nulls.size() + 1);
}

Vector bonferroni_adjust(const Vector& p_raw) {
  Vector adj(p_raw.size());
  const double m = static_cast<double>(p_raw.size());
  for (std::size_t i = 0; i < p_raw.size(); ++i) adj[i] = std::min(1.0, m * p_raw[i]);
  return adj;
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("sorted_quantile: empty sample");
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(std::clamp(pos, 0.0, double(sorted.size() - 1))));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Matrix global_ecdf(const PitMatrix& pit, const AlphaGrid& grid) {
  grid.validate();
  if (pit.n() < 1) throw ContractError("global_ecdf: empty PIT matrix");
  Matrix curves(pit.m(), grid.size());
  for (int i = 0; i < pit.m(); ++i) ecdf_curve(pit.values.col_vector(i), grid, curves.row(i));
  return curves;
}

double coverage_statistic(std::span<const double> curve, const AlphaGrid& grid) {
  require_dim(curve.size(), grid.size(), "coverage_statistic");
  double s = 0.0;
  for (int k = 0; k < grid.size(); ++k) {
    const double dev = curve[k] - grid.alphas[k];
    s += dev * dev;
  }
  return s / grid.size();
}

GlobalReport global_test(const PitMatrix& pit, const AlphaGrid& grid, double level, int B,
                         std::uint64_t seed) {
  grid.validate();
  if (!(level > 0.0 && level < 1.0)) throw ContractError("global_test: level outside (0,1)");
  if (B < 99) throw ConfigError("global_test: need B >= 99 null replicates");
  const int m = pit.m();
  const double floor_p = 1.0 / (B + 1);
  if (floor_p > level / m)
    throw ConfigError("global_test: B = " + std::to_string(B) +
                      " cannot resolve the Bonferroni-adjusted level; need B >= " +
                      std::to_string(static_cast<int>(std::ceil(m / level)) - 1));

  GlobalReport rep;
  rep.grid = grid;
  rep.level = level;
  rep.n = pit.n();
  rep.b_replicates = B;
  rep.seed = seed;
  rep.curves = global_ecdf(pit, grid);
  rep.stats.resize(m);
  for (int i = 0; i < m; ++i) rep.stats[i] = coverage_statistic(rep.curves.row(i), grid);

  // null replicates: iid uniform samples of the same size through the same
  // pipeline; one replicate is shared across the m covariates
  Matrix null_curves(B, grid.size());
  Vector null_stats(B);
  parallel_for(B, [&](std::size_t b) {
    RngStream rng(seed, 2000 + b);
    ecdf_curve(rng.u01_vector(pit.n()), grid, null_curves.row(static_cast<int>(b)));
    null_stats[b] = coverage_statistic(null_curves.row(static_cast<int>(b)), grid);
  });

  rep.p_raw.resize(m);
  for (int i = 0; i < m; ++i) rep.p_raw[i] = mc_pvalue(rep.stats[i], null_stats);
  rep.p_adj = bonferroni_adjust(rep.p_raw);
  rep.reject = false;
  for (double p : rep.p_adj) rep.reject = rep.reject || p < level;

  // pointwise bands at the Bonferroni-adjusted level
  const double lam = level / m;
  rep.band_lo.resize(grid.size());
  rep.band_hi.resize(grid.size());
  Vector column(B);
  for (int k = 0; k < grid.size(); ++k) {
    for (int b = 0; b < B; ++b) column[b] = null_curves(b, k);
    std::sort(column.begin(), column.end());
    rep.band_lo[k] = sorted_quantile(column, lam / 2);
    rep.band_hi[k] = sorted_quantile(column, 1.0 - lam / 2);
  }
  return rep;
}

void emit_ppplot(const GlobalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char buf[40];
  for (int i = 0; i < report.curves.rows(); ++i) {
    const auto path = dir / ("ppplot_p" + std::to_string(i + 1) + ".csv");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open PP-plot file for writing: " + path.string());
    out << "alpha,r_hat,band_lo,band_hi\n";
    for (int k = 0; k < report.grid.size(); ++k) {
      const double row[4] = {report.grid.alphas[k], report.curves(i, k), report.band_lo[k],
                             report.band_hi[k]};
      for (int c = 0; c < 4; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
        out << buf << (c < 3 ? "," : "\n");
      }
    }
  }
}

}  // namespace flowcheck
