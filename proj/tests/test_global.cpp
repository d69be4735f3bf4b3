#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowcheck/errors.hpp"
#include "flowcheck/global_diag.hpp"
#include "flowcheck/rng.hpp"
#include "flowcheck/tasks.hpp"
#include "support/oracles.hpp"

using namespace flowcheck;

namespace {

PitMatrix pit_from_column(Vector col) {
  PitMatrix p;
  p.values = Matrix(static_cast<int>(col.size()), 1);
  for (std::size_t i = 0; i < col.size(); ++i) p.values(static_cast<int>(i), 0) = col[i];
  return p;
}

}  // namespace

TEST_CASE("global_ecdf counts exactly") {
  PitMatrix pit = pit_from_column({0.1, 0.2, 0.3, 0.4});
  AlphaGrid g = AlphaGrid::from_values({0.05, 0.25, 0.95});
  Matrix curves = global_ecdf(pit, g);
  CHECK(curves(0, 0) == 0.0);   // alpha below the minimum entry
  CHECK(curves(0, 1) == 0.5);   // two of four at 0.25
  CHECK(curves(0, 2) == 1.0);   // alpha above the maximum entry
  PitMatrix empty;
  empty.values = Matrix(0, 1);
  CHECK_THROWS_AS(global_ecdf(empty, g), ContractError);
}

TEST_CASE("uniform columns stay inside the DKW envelope") {
  AlphaGrid g = AlphaGrid::equispaced(100);
  int pass = 0;
  for (int seed = 0; seed < 100; ++seed) {
    RngStream rng(400 + seed);
    PitMatrix pit = pit_from_column(rng.u01_vector(10000));
    Matrix curves = global_ecdf(pit, g);
    double worst = 0.0;
    for (int k = 0; k < g.size(); ++k)
      worst = std::max(worst, std::fabs(curves(0, k) - g.alphas[k]));
    pass += worst < 0.02 ? 1 : 0;
  }
  CHECK(pass >= 95);
}

TEST_CASE("coverage statistic arithmetic") {
  AlphaGrid g = AlphaGrid::from_values({0.25, 0.5, 0.75});
  Vector perfect{0.25, 0.5, 0.75};
  CHECK(coverage_statistic(perfect, g) == 0.0);
  Vector offset{0.35, 0.6, 0.85};
  CHECK(coverage_statistic(offset, g) == doctest::Approx(0.01).epsilon(1e-12));
  Vector mixed{0.30, 0.45, 0.80};
  CHECK(coverage_statistic(mixed, g) == doctest::Approx(0.0025).epsilon(1e-12));
}

TEST_CASE("order-statistics input gives a vanishing statistic and p = 1") {
  const int n = 10000;
  Vector col(n);
  for (int i = 0; i < n; ++i) col[i] = static_cast<double>(i + 1) / (n + 1);
  PitMatrix pit = pit_from_column(col);
  AlphaGrid g = AlphaGrid::equispaced(100);
  GlobalReport rep = global_test(pit, g, 0.05, 99, 7);
  CHECK(rep.stats[0] < 1e-8);
  CHECK(rep.p_raw[0] == doctest::Approx(1.0));
  CHECK(rep.p_adj[0] == doctest::Approx(1.0));  // m = 1: adjusted equals raw
  CHECK(!rep.reject);
}

TEST_CASE("shifted column is detected at the Monte-Carlo floor") {
  const int n = 10000;
  RngStream rng(8);
  Vector col = rng.u01_vector(n);
  for (double& u : col) u = std::min(u + 0.1, 1.0 - 1e-12);
  PitMatrix pit = pit_from_column(col);
  AlphaGrid g = AlphaGrid::equispaced(100);
  GlobalReport rep = global_test(pit, g, 0.05, 999, 9);
  // deviation is ~0.1 on the upper nine-tenths of the grid
  double in_range = 0.0;
  for (double a : g.alphas) in_range += a >= 0.1 ? 1.0 : 0.0;
  CHECK(rep.stats[0] >= 0.0025 * (in_range / g.size()));
  CHECK(rep.p_raw[0] == doctest::Approx(1.0 / 1000.0));
  CHECK(rep.reject);
}

TEST_CASE("dispersion-injected estimator is rejected, statistic grows with gamma") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  AlphaGrid g = AlphaGrid::equispaced(100);

  // single full test at gamma = 1.5
  ConditionalFlow f15 = inject(oracle_flow(task),
                               {MiscalibrationSpec::Kind::dispersion, 1.5, {0, 1}, 0});
  CalibrationDataset data = simulate(task, 10000, 21);
  GlobalReport rep = global_test(pit_matrix(f15, data), g, 0.05, 999, 22);
  CHECK(rep.reject);
  CHECK(rep.p_raw[0] == doctest::Approx(1.0 / 1000.0));
  CHECK(rep.p_adj[0] == doctest::Approx(2.0 / 1000.0));

  // median statistic is monotone across gamma in {1.1, 1.3, 1.5}
  Vector medians;
  for (double gamma : {1.1, 1.3, 1.5}) {
    ConditionalFlow f = inject(oracle_flow(task),
                               {MiscalibrationSpec::Kind::dispersion, gamma, {0, 1}, 0});
    Vector stats;
    for (int seed = 0; seed < 20; ++seed) {
      CalibrationDataset d = simulate(task, 5000, 600 + seed);
      Matrix curves = global_ecdf(pit_matrix(f, d), g);
      stats.push_back(coverage_statistic(curves.row(0), g));
    }
    std::sort(stats.begin(), stats.end());
    medians.push_back(0.5 * (stats[9] + stats[10]));
  }
  CHECK(medians[0] < medians[1]);
  CHECK(medians[1] < medians[2]);
}

TEST_CASE("type-I error of the global test stays near nominal") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  ConditionalFlow f = oracle_flow(task);
  AlphaGrid g = AlphaGrid::equispaced(100);
  int rejections = 0;
  int band_hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    CalibrationDataset data = simulate(task, 10000, 3000 + seed);
    GlobalReport rep = global_test(pit_matrix(f, data), g, 0.05, 99, 4000 + seed);
    rejections += rep.reject ? 1 : 0;
    for (int k = 0; k < g.size(); ++k)
      band_hits += (g.alphas[k] >= rep.band_lo[k] && g.alphas[k] <= rep.band_hi[k]) ? 1 : 0;
  }
  CHECK(rejections <= 10);
  // the ideal curve sits inside the band for >= 93 grid points on average
  CHECK(band_hits >= 93 * 100);
}

TEST_CASE("global_test configuration errors") {
  PitMatrix pit = pit_from_column({0.1, 0.5, 0.9});
  AlphaGrid g = AlphaGrid::equispaced(10);
  CHECK_THROWS_AS(global_test(pit, g, 0.05, 50, 1), ConfigError);   // B < 99
  CHECK_THROWS_AS(global_test(pit, g, 0.005, 99, 1), ConfigError);  // floor above level/m
  CHECK_THROWS_AS(global_test(pit, g, 0.0, 999, 1), ContractError);
}

TEST_CASE("pp-plot emission: shape, band order, byte-identical re-emission") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  ConditionalFlow f = oracle_flow(task);
  CalibrationDataset data = simulate(task, 2000, 31);
  AlphaGrid g = AlphaGrid::equispaced(25);
  GlobalReport rep = global_test(pit_matrix(f, data), g, 0.05, 99, 32);

  const auto dir = std::filesystem::temp_directory_path() / "fc_ppplot_test";
  emit_ppplot(rep, dir);
  auto read_all = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string first = read_all(dir / "ppplot_p1.csv");
  std::string first2 = read_all(dir / "ppplot_p2.csv");
  CHECK(static_cast<int>(std::count(first.begin(), first.end(), '\n')) == g.size() + 1);
  CHECK(static_cast<int>(std::count(first2.begin(), first2.end(), '\n')) == g.size() + 1);
  for (int k = 0; k < g.size(); ++k) CHECK(rep.band_lo[k] <= rep.band_hi[k]);

  emit_ppplot(rep, dir);
  CHECK(read_all(dir / "ppplot_p1.csv") == first);
  CHECK(read_all(dir / "ppplot_p2.csv") == first2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mc_pvalue and bonferroni arithmetic") {
  Vector nulls{0.5, 1.0, 2.0, 3.0};
  CHECK(mc_pvalue(10.0, nulls) == doctest::Approx(1.0 / 5.0));   // floor
  CHECK(mc_pvalue(0.0, nulls) == doctest::Approx(1.0));          // all nulls above
  CHECK(mc_pvalue(1.5, nulls) == doctest::Approx(3.0 / 5.0));
  Vector adj = bonferroni_adjust({0.01, 0.4, 0.9});
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(1.0));
  CHECK(adj[2] == doctest::Approx(1.0));
}
