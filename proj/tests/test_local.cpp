#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flowcheck/errors.hpp"
#include "flowcheck/global_diag.hpp"
#include "flowcheck/local_diag.hpp"
#include "flowcheck/rng.hpp"
#include "flowcheck/tasks.hpp"
#include "support/oracles.hpp"

using namespace flowcheck;

namespace {

PitMatrix pit_from_columns(const std::vector<Vector>& cols) {
  PitMatrix p;
  p.values = Matrix(static_cast<int>(cols[0].size()), static_cast<int>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < cols[c].size(); ++r)
      p.values(static_cast<int>(r), static_cast<int>(c)) = cols[c][r];
  return p;
}

CalibrationDataset features_only(const Matrix& x) {
  CalibrationDataset d;
  d.x = x;
  d.theta = Matrix(x.rows(), 1);
  d.calibration_ok = true;
  d.task = "synthetic";
  return d;
}

}  // namespace

TEST_CASE("indicator datasets threshold exactly and stay monotone in alpha") {
  PitMatrix pit = pit_from_columns({{0.1, 0.2, 0.6, 0.9}});
  Matrix x(4, 1);
  for (int r = 0; r < 4; ++r) x(r, 0) = r;
  AlphaGrid g = AlphaGrid::from_values({0.25, 0.5, 0.75});
  IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);

  // P = 0.3 at alpha 0.25 -> 0 and alpha 0.5 -> 1
  PitMatrix single = pit_from_columns({{0.3}});
  Matrix x1(1, 1);
  IndicatorDatasets one = build_indicator_datasets(single, features_only(x1), g);
  CHECK(one.target(0, 0, 0) == 0);
  CHECK(one.target(0, 1, 0) == 1);

  // per-alpha means 0.5, 0.5, 0.75
  const double expect[3] = {0.5, 0.5, 0.75};
  for (int k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (int n = 0; n < 4; ++n) mean += ds.target(0, k, n);
    CHECK(mean / 4.0 == doctest::Approx(expect[k]));
  }

  // column means equal the global ecdf curve
  Matrix curves = global_ecdf(pit, g);
  for (int k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (int n = 0; n < 4; ++n) mean += ds.target(0, k, n);
    CHECK(mean / 4.0 == doctest::Approx(curves(0, k)));
  }

  // monotone in alpha for every (covariate, row) on random inputs
  RngStream rng(1);
  PitMatrix rnd = pit_from_columns({rng.u01_vector(200), rng.u01_vector(200)});
  Matrix xr(200, 2);
  AlphaGrid g10 = AlphaGrid::equispaced(10);
  IndicatorDatasets dr = build_indicator_datasets(rnd, features_only(xr), g10);
  for (int i = 0; i < 2; ++i)
    for (int n = 0; n < 200; ++n)
      for (int k = 1; k < 10; ++k) CHECK(dr.target(i, k - 1, n) <= dr.target(i, k, n));
}

TEST_CASE("bank on x-independent PIT gives flat regressors near alpha") {
  RngStream rng(2);
  const int n = 10000;
  PitMatrix pit = pit_from_columns({rng.u01_vector(n)});
  Matrix x(n, 2);
  for (int r = 0; r < n; ++r) {
    x(r, 0) = rng.normal();
    x(r, 1) = rng.normal();
  }
  AlphaGrid g = AlphaGrid::from_values({0.1, 0.3, 0.5, 0.7, 0.9});
  IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 0, 3);
  CHECK(bank.degenerate_observed == 0);
  for (double a : {-1.0, 0.0, 1.0})
    for (int k = 0; k < g.size(); ++k)
      CHECK(std::fabs(bank.obs(0, k).predict_proba({a, 0.5 * a}) - g.alphas[k]) < 0.02);
}

TEST_CASE("local statistic arithmetic through a constant bank") {
  // a sky-high tolerance freezes every logistic fit at sigma(0) = 0.5
  RngStream rng(4);
  const int n = 400;
  PitMatrix pit = pit_from_columns({rng.u01_vector(n)});
  Matrix x(n, 1);
  for (int r = 0; r < n; ++r) x(r, 0) = rng.normal();
  AlphaGrid g = AlphaGrid::from_values({0.25, 0.5, 0.75});
  IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);
  RegressorConfig lazy;
  lazy.tol = 1e9;
  RegressorBank bank = fit_bank(ds, lazy, 0, 5);
  Vector stats = local_statistic(bank, {0.7}, g);
  // mean of (0.5 - alpha)^2 over {0.25, 0.5, 0.75}
  CHECK(stats[0] == doctest::Approx((0.0625 + 0.0 + 0.0625) / 3.0).epsilon(1e-12));
}

TEST_CASE("monte-carlo p-values are valid under the null") {
  // simulate fresh uniform targets for observed and null banks alike, then the
  // p-value at a fixed x must be (sub)uniform: P(p <= u) <= u + 2/(B+1)
  const int n = 800, B = 39, nsim = 500;
  RngStream xr(6);
  Matrix x(n, 2);
  for (int r = 0; r < n; ++r) {
    x(r, 0) = xr.normal();
    x(r, 1) = xr.normal();
  }
  AlphaGrid g = AlphaGrid::equispaced(5);
  const Vector x0{1.0, -0.5};
  Vector pvals;
  for (int sim = 0; sim < nsim; ++sim) {
    RngStream rng(7000 + sim);
    PitMatrix pit = pit_from_columns({rng.u01_vector(n)});
    IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);
    RegressorBank bank = fit_bank(ds, RegressorConfig{}, B, 8000 + sim);
    LocalReport rep = local_test(bank, x0, g, 0.05);
    pvals.push_back(rep.p_raw[0]);
  }
  for (double u : {0.2, 0.4, 0.6, 0.8}) {
    double frac = 0.0;
    for (double p : pvals) frac += p <= u ? 1.0 : 0.0;
    frac /= nsim;
    CHECK(frac <= u + 2.0 / (B + 1));
  }
}

TEST_CASE("local test: floors, insufficient B, grid mismatch, B = 0") {
  RngStream rng(9);
  const int n = 1500;
  // heavily biased PIT: all mass near zero
  Vector col(n);
  for (int r = 0; r < n; ++r) col[r] = 0.02 + 0.05 * rng.u01();
  PitMatrix pit = pit_from_columns({col, rng.u01_vector(n)});
  Matrix x(n, 1);
  for (int r = 0; r < n; ++r) x(r, 0) = rng.normal();
  AlphaGrid g = AlphaGrid::equispaced(10);
  IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 99, 10);

  LocalReport rep = local_test(bank, {0.3}, g, 0.05);
  CHECK(rep.has_pvalues);
  CHECK(rep.p_raw[0] == doctest::Approx(0.01));  // above every null replicate
  CHECK(rep.p_adj[0] == doctest::Approx(0.02));
  CHECK(rep.reject);
  CHECK(rep.stats[0] > 0.0);
  // covariate 2 is clean
  CHECK(rep.p_raw[1] > 0.05);

  CHECK_THROWS_AS(local_test(bank, {0.3}, g, 0.01), ConfigError);  // needs B >= 199
  CHECK_THROWS_AS(local_test(bank, {0.3}, AlphaGrid::equispaced(9), 0.05), ContractError);

  RegressorBank empty = fit_bank(ds, RegressorConfig{}, 0, 10);
  CHECK(empty.nulls.empty());
  CHECK_THROWS_AS(local_test(empty, {0.3}, g, 0.05), ConfigError);
  std::vector<LocalReport> reps = sweep(empty, x, g, 0.05);
  CHECK(reps.size() == static_cast<std::size_t>(n));
  CHECK(!reps[0].has_pvalues);
  CHECK(reps[0].p_raw.empty());
}

TEST_CASE("degenerate regressors are counted in the bank health summary") {
  RngStream rng(11);
  const int n = 50;
  PitMatrix pit = pit_from_columns({rng.u01_vector(n)});
  Matrix x(n, 1);
  for (int r = 0; r < n; ++r) x(r, 0) = rng.normal();
  // alpha so small that no PIT value falls below it: all-zero targets
  AlphaGrid g = AlphaGrid::from_values({1e-6, 0.5});
  IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 5, 12);
  CHECK(bank.degenerate_observed >= 1);
  CHECK(bank.degenerate_null >= 5);
  CHECK(bank.null_seeds.size() == 5);
}

TEST_CASE("sweep of length one reduces to local_test; constant paths repeat exactly") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  ConditionalFlow f = oracle_flow(task);
  CalibrationDataset data = simulate(task, 3000, 13);
  PitMatrix pit = pit_matrix(f, data);
  AlphaGrid g = AlphaGrid::equispaced(10);
  IndicatorDatasets ds = build_indicator_datasets(pit, data, g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 99, 14);

  Matrix one(1, 2);
  one(0, 0) = 0.8;
  one(0, 1) = -0.3;
  std::vector<LocalReport> reps = sweep(bank, one, g, 0.05);
  LocalReport direct = local_test(bank, {0.8, -0.3}, g, 0.05);
  CHECK(reps.size() == 1);
  for (int i = 0; i < 2; ++i) {
    CHECK(reps[0].stats[i] == direct.stats[i]);
    CHECK(reps[0].p_raw[i] == direct.p_raw[i]);
  }

  Matrix twice(2, 2);
  for (int r = 0; r < 2; ++r) {
    twice(r, 0) = 0.8;
    twice(r, 1) = -0.3;
  }
  std::vector<LocalReport> rep2 = sweep(bank, twice, g, 0.05);
  for (int i = 0; i < 2; ++i) {
    CHECK(rep2[0].stats[i] == rep2[1].stats[i]);
    CHECK(rep2[0].p_raw[i] == rep2[1].p_raw[i]);
  }
}

TEST_CASE("averaged local curves track the global ecdf") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  ConditionalFlow f = oracle_flow(task);
  CalibrationDataset data = simulate(task, 10000, 15);
  PitMatrix pit = pit_matrix(f, data);
  AlphaGrid g = AlphaGrid::equispaced(10);
  IndicatorDatasets ds = build_indicator_datasets(pit, data, g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 0, 16);
  Matrix curves = global_ecdf(pit, g);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < g.size(); ++k) {
      double avg = 0.0;
      for (int r = 0; r < data.n(); ++r)
        avg += bank.obs(i, k).predict_proba(data.x.row_vector(r));
      avg /= data.n();
      CHECK(std::fabs(avg - curves(i, k)) < 0.05);
    }
}

TEST_CASE("family-wise error of the bonferroni decision stays controlled") {
  // H0 throughout: indicator targets are thresholded iid uniforms
  const int n = 2000, B = 99;
  RngStream xr(17);
  Matrix x(n, 2);
  for (int r = 0; r < n; ++r) {
    x(r, 0) = xr.normal();
    x(r, 1) = xr.normal();
  }
  AlphaGrid g = AlphaGrid::equispaced(10);
  const Vector x0{0.5, 0.5};
  int rejections = 0;
  for (int run = 0; run < 100; ++run) {
    RngStream rng(18000 + run);
    PitMatrix pit = pit_from_columns({rng.u01_vector(n), rng.u01_vector(n)});
    IndicatorDatasets ds = build_indicator_datasets(pit, features_only(x), g);
    RegressorBank bank = fit_bank(ds, RegressorConfig{}, B, 19000 + run);
    rejections += local_test(bank, x0, g, 0.05).reject ? 1 : 0;
  }
  CHECK(rejections <= 8);
}

TEST_CASE("sign-bias blind spot: local test rejects at x1-extreme points") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  ConditionalFlow f = inject(oracle_flow(task),
                             {MiscalibrationSpec::Kind::sign_bias, 0.085, {0}, 0});
  CalibrationDataset data = simulate(task, 5000, 20);
  PitMatrix pit = pit_matrix(f, data);
  AlphaGrid g = AlphaGrid::equispaced(25);
  IndicatorDatasets ds = build_indicator_datasets(pit, data, g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 99, 21);
  LocalReport hi = local_test(bank, {3.0, 0.0}, g, 0.05);
  LocalReport lo = local_test(bank, {-3.0, 0.0}, g, 0.05);
  CHECK(hi.reject);
  CHECK(lo.reject);
  CHECK(hi.p_adj[0] < 0.05);
  CHECK(lo.p_adj[0] < 0.05);
}

TEST_CASE("gain toy: coupled dispersion yields a u-shaped statistic in g") {
  GainToyTask task;
  ConditionalFlow est = gain_toy_pilot_flow(task, 6000, 22, 0.5);
  CalibrationDataset data = simulate(task, 6000, 23);
  PitMatrix pit = pit_matrix(est, data);
  AlphaGrid g = AlphaGrid::equispaced(20);
  IndicatorDatasets ds = build_indicator_datasets(pit, data, g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 0, 24);

  Vector g_path;
  for (double gv = -20.0; gv <= 20.0; gv += 2.5) g_path.push_back(gv);
  Matrix pts = gain_sweep_observations(task, g_path, 1.0, 25);
  std::vector<LocalReport> reps = sweep(bank, pts, g, 0.05);

  // statistic at the extremes dominates the center for both covariates
  const std::size_t mid = g_path.size() / 2;
  for (int i = 0; i < 2; ++i) {
    CHECK(reps.front().stats[i] >= 2.0 * reps[mid].stats[i]);
    CHECK(reps.back().stats[i] >= 2.0 * reps[mid].stats[i]);
  }
  // binned |g| trend is non-decreasing
  for (int i = 0; i < 2; ++i) {
    Vector bins(4, 0.0), counts(4, 0.0);
    for (std::size_t r = 0; r < g_path.size(); ++r) {
      const int b = std::min(3, static_cast<int>(std::fabs(g_path[r]) / 5.0));
      bins[b] += reps[r].stats[i];
      counts[b] += 1.0;
    }
    for (int b = 0; b < 4; ++b) bins[b] /= counts[b];
    CHECK(bins[0] <= bins[1]);
    CHECK(bins[1] <= bins[2]);
    CHECK(bins[2] <= bins[3]);
  }
}

TEST_CASE("sweep and pp-plot emission formats") {
  GaussianLinearTask task = GaussianLinearTask::identity(2);
  ConditionalFlow f = oracle_flow(task);
  CalibrationDataset data = simulate(task, 1500, 26);
  PitMatrix pit = pit_matrix(f, data);
  AlphaGrid g = AlphaGrid::equispaced(8);
  IndicatorDatasets ds = build_indicator_datasets(pit, data, g);
  RegressorBank bank = fit_bank(ds, RegressorConfig{}, 99, 27);

  Matrix pts(3, 2);
  for (int r = 0; r < 3; ++r) {
    pts(r, 0) = -1.0 + r;
    pts(r, 1) = 0.5;
  }
  std::vector<LocalReport> reps = sweep(bank, pts, g, 0.05);
  const auto dir = std::filesystem::temp_directory_path() / "fc_local_emit";
  std::filesystem::create_directories(dir);
  emit_sweep(reps, pts, dir / "sweep.csv");

  std::ifstream in(dir / "sweep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x_1,x_2,T_1,T_2,p_1,p_2,p_adj_1,p_adj_2");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);

  emit_local_ppplot(reps[0], dir / "point_000");
  std::ifstream pp(dir / "point_000" / "ppplot_p1.csv");
  std::getline(pp, header);
  CHECK(header == "alpha,r_hat,band_lo,band_hi");
  rows = 0;
  while (std::getline(pp, line)) ++rows;
  CHECK(rows == g.size());
  for (int k = 0; k < g.size(); ++k) CHECK(reps[0].band_lo[k] <= reps[0].band_hi[k]);
  std::filesystem::remove_all(dir);
}
