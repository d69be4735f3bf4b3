// flowcheck: consistency diagnostics for conditional normalizing-flow
// posterior estimators. Workflow: simulate -> train (or oracle/pilot) ->
// diagnose-global -> diagnose-local -> independence.
//
// Exit codes: 0 accept, 1 reject, 2 usage/config error, 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowcheck/bundle.hpp"
#include "flowcheck/dataset.hpp"
#include "flowcheck/errors.hpp"
#include "flowcheck/flow.hpp"
#include "flowcheck/flow_train.hpp"
#include "flowcheck/global_diag.hpp"
#include "flowcheck/independence.hpp"
#include "flowcheck/local_diag.hpp"
#include "flowcheck/parallel.hpp"
#include "flowcheck/pit.hpp"
#include "flowcheck/regress.hpp"
#include "flowcheck/sbc.hpp"
#include "flowcheck/tasks.hpp"

namespace fc = flowcheck;
namespace fs = std::filesystem;

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// JSON key/value config files: {"n": 1000, "task": "gaussian-linear"}.
// Keys map to long option names of the subcommand; explicit command-line
// flags override config values. Implemented by splicing config-derived
// arguments right after the subcommand token, with take-last semantics.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::size_t sub_pos = args.size();
  for (std::size_t i = 0; i < args.size(); ++i)
    if (!args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
      break;
    }
  std::string config_path;
  for (std::size_t i = sub_pos; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw fc::ConfigError("cannot open config file: " + config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw fc::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw fc::ConfigError("config must be a JSON object of key/value pairs");

  std::vector<std::string> expanded(args.begin(), args.begin() + sub_pos + 1);
  for (const auto& [key, value] : j.items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) expanded.push_back("--" + key);
      continue;
    }
    expanded.push_back("--" + key);
    expanded.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  expanded.insert(expanded.end(), args.begin() + sub_pos + 1, args.end());
  return expanded;
}

struct TaskOptions {
  std::string task = "gaussian-linear";
  int m = 2, d = 2;
  double sigma = 1.0;
  double mu_lo = 0.5, mu_hi = 1.5, g_max = 20.0, noise_sd = 0.25;
  int gain_d = 16;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--task", task, "Benchmark task: gaussian-linear or gain-toy")
        ->check(CLI::IsMember({"gaussian-linear", "gain-toy"}))
        ->required();
    cmd->add_option("--m", m, "Parameter dimension (gaussian-linear)")->check(CLI::PositiveNumber);
    cmd->add_option("--d", d, "Observation dimension (gaussian-linear)")->check(CLI::PositiveNumber);
    cmd->add_option("--sigma", sigma, "Observation noise sd (gaussian-linear)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mu-lo", mu_lo, "Lower bound of the latent prior (gain-toy)");
    cmd->add_option("--mu-hi", mu_hi, "Upper bound of the latent prior (gain-toy)");
    cmd->add_option("--g-max", g_max, "Gain prior half-range (gain-toy)")->check(CLI::PositiveNumber);
    cmd->add_option("--noise-sd", noise_sd, "Template noise sd (gain-toy)")->check(CLI::PositiveNumber);
    cmd->add_option("--gain-d", gain_d, "Observation dimension (gain-toy)")->check(CLI::PositiveNumber);
  }

  fc::GaussianLinearTask gaussian() const {
    return d == m ? fc::GaussianLinearTask::identity(m, sigma)
                  : fc::GaussianLinearTask::stacked(m, d, sigma);
  }
  fc::GainToyTask gain() const {
    fc::GainToyTask t;
    t.d = gain_d;
    t.mu_lo = mu_lo;
    t.mu_hi = mu_hi;
    t.g_max = g_max;
    t.noise_sd = noise_sd;
    return t;
  }
};

struct InjectOptions {
  std::string kind;
  double magnitude = 0.0;
  std::vector<int> coords;
  int sign_coord = 0;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--inject", kind, "Miscalibration kind: bias, dispersion or sign-bias")
        ->check(CLI::IsMember({"bias", "dispersion", "sign-bias"}));
    cmd->add_option("--magnitude", magnitude,
                    "Injection size: bias delta, dispersion factor, or sign-bias delta");
    cmd->add_option("--coords", coords, "Targeted theta coordinates (0-based)")->delimiter(',');
    cmd->add_option("--sign-coord", sign_coord, "x coordinate whose sign drives sign-bias");
  }

  fc::ConditionalFlow apply(const fc::ConditionalFlow& flow) const {
    if (kind.empty()) return flow;
    fc::MiscalibrationSpec spec;
    spec.kind = kind == "bias"         ? fc::MiscalibrationSpec::Kind::bias
                : kind == "dispersion" ? fc::MiscalibrationSpec::Kind::dispersion
                                       : fc::MiscalibrationSpec::Kind::sign_bias;
    spec.magnitude = magnitude;
    spec.coords = coords.empty() ? std::vector<int>{0} : coords;
    spec.sign_coord = sign_coord;
    return fc::inject(flow, spec);
  }
};

void check_level(double level) {
  if (!(level > 0.0 && level < 0.5))
    throw fc::ConfigError("level must lie strictly inside (0, 0.5)");
}

void check_pvalue_floor(int b, double level, int m) {
  if (b < 1 || 1.0 / (b + 1) > level / m)
    throw fc::ConfigError("p-value floor 1/(B+1) exceeds level/m: need B >= " +
                          std::to_string(static_cast<int>(std::ceil(m / level)) - 1));
}

fc::CalibrationDataset load_dataset(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::string(magic, 4) == "FCK1") return fc::load_dataset_binary(path);
  return fc::load_dataset_csv(path);
}

// leakage guard: the calibration data must not be the flow's training data
void check_disjoint(const fc::ConditionalFlow& flow, const fc::CalibrationDataset& data) {
  if (!flow.train_data_tag.empty() && flow.train_data_tag == data.tag())
    throw fc::ConfigError("calibration dataset '" + data.tag() +
                          "' is the dataset the flow was trained on; diagnostics on training "
                          "pairs are invalid (simulate a fresh calibration set)");
}

// evaluation points: columnar file with x_1..x_d header (theta columns allowed
// and ignored, so held-out dataset files work unchanged)
fc::Matrix load_points(const std::string& path, int expect_d) {
  fc::CalibrationDataset data = [&] {
    try {
      return load_dataset(path);
    } catch (const fc::ConfigError&) {
      // x-only file: synthesize a theta-free dataset by parsing manually
      std::ifstream in(path);
      if (!in) throw fc::ConfigError("cannot open points file: " + path);
      std::string line;
      std::vector<double> vals;
      int d = -1;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (d < 0) {
          d = 1 + static_cast<int>(std::count(line.begin(), line.end(), ','));
          if (line.rfind("x_", 0) != 0)
            throw fc::ConfigError("points file must start with an x_1..x_d header: " + path);
          continue;
        }
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
      }
      fc::CalibrationDataset out;
      const int n = d > 0 ? static_cast<int>(vals.size()) / d : 0;
      out.x = fc::Matrix(n, d);
      out.theta = fc::Matrix(n, 1);
      std::copy(vals.begin(), vals.end(), out.x.data().begin());
      out.calibration_ok = true;
      return out;
    }
  }();
  if (data.d() != expect_d)
    throw fc::ContractError("evaluation points have dimension " + std::to_string(data.d()) +
                            ", the flow expects d = " + std::to_string(expect_d));
  return data.x;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const TaskOptions& task, int n, std::uint64_t seed, const std::string& out,
                 bool binary) {
  fc::CalibrationDataset data = task.task == "gaussian-linear"
                                    ? fc::simulate(task.gaussian(), n, seed)
                                    : fc::simulate(task.gain(), n, seed);
  if (binary) fc::save_dataset_binary(data, out);
  else fc::save_dataset_csv(data, out);
  std::cout << "wrote " << data.n() << " pairs (m=" << data.m() << ", d=" << data.d() << ") to "
            << out << "\n";
  return kExitAccept;
}

int cmd_train(const std::string& data_path, const fc::FlowTrainConfig& cfg,
              const std::string& out) {
  fc::CalibrationDataset data = load_dataset(data_path);
  fc::ConditionalFlow flow = fc::train_flow(data, cfg);
  flow.save(out);
  std::cout << "trained flow " << flow.tag() << " on " << data.tag() << ", saved to " << out
            << "\n";
  return kExitAccept;
}

int cmd_oracle(const TaskOptions& task, const InjectOptions& inject_opt, const std::string& out) {
  if (task.task != "gaussian-linear")
    throw fc::ConfigError("oracle flows exist for the gaussian-linear task only; "
                          "use 'pilot' for the gain toy");
  fc::ConditionalFlow flow = inject_opt.apply(fc::oracle_flow(task.gaussian()));
  flow.save(out);
  std::cout << "wrote oracle flow " << flow.tag() << " to " << out << "\n";
  return kExitAccept;
}

int cmd_pilot(const TaskOptions& task, const InjectOptions& inject_opt, int pilot_n,
              std::uint64_t seed, double coupling, const std::string& out) {
  if (task.task != "gain-toy")
    throw fc::ConfigError("pilot reference flows exist for the gain-toy task only");
  fc::ConditionalFlow flow =
      inject_opt.apply(fc::gain_toy_pilot_flow(task.gain(), pilot_n, seed, coupling));
  flow.save(out);
  std::cout << "wrote pilot flow " << flow.tag() << " to " << out << "\n";
  return kExitAccept;
}

int cmd_diagnose_global(const std::string& flow_path, const std::string& data_path,
                        const std::string& run_dir, int grid_size, double level, int b,
                        std::uint64_t seed, bool with_sbc, int sbc_draws) {
  check_level(level);
  fc::ConditionalFlow flow = fc::ConditionalFlow::load(flow_path);
  fc::CalibrationDataset data = load_dataset(data_path);
  check_disjoint(flow, data);
  check_pvalue_floor(b, level, flow.m());

  fc::PitMatrix pit = fc::pit_matrix(flow, data);
  fc::AlphaGrid grid = fc::AlphaGrid::equispaced(grid_size);
  fc::GlobalReport report = fc::global_test(pit, grid, level, b, seed);

  std::optional<fc::SbcSummary> sbc;
  if (with_sbc) {
    fc::SbcRanks ranks = fc::sbc_ranks(flow, data, sbc_draws, seed + 1);
    fc::SbcSummary s;
    s.draws = sbc_draws;
    s.level = level;
    for (int c = 0; c < ranks.m; ++c) {
      s.p_values.push_back(fc::sbc_chi2_pvalue(ranks, c));
      s.reject = s.reject || s.p_values.back() < level / ranks.m;
    }
    sbc = s;
  }
  fc::write_global_bundle(report, sbc, flow.tag(), data.tag(), pit.clip_count, run_dir);
  fc::save_pit_matrix(pit, fs::path(run_dir) / "global" / "pit.csv");

  std::cout << (report.reject ? "REJECT" : "ACCEPT") << " global consistency at level " << level;
  if (report.reject) {
    std::cout << " (offending covariates:";
    for (std::size_t i = 0; i < report.p_adj.size(); ++i)
      if (report.p_adj[i] < level) std::cout << " P_" << (i + 1);
    std::cout << ")";
  }
  std::cout << "\n";
  if (sbc) std::cout << "SBC baseline: " << (sbc->reject ? "REJECT" : "ACCEPT") << "\n";
  return report.reject ? kExitReject : kExitAccept;
}

int cmd_diagnose_local(const std::string& flow_path, const std::string& data_path,
                       const std::string& run_dir, const std::string& points_path,
                       const std::string& sweep_gain, double sweep_mu0,
                       std::uint64_t sweep_seed, const TaskOptions& task, int grid_size,
                       double level, int b, const std::string& kind, std::uint64_t seed,
                       bool force) {
  check_level(level);
  fc::ConditionalFlow flow = fc::ConditionalFlow::load(flow_path);
  fc::CalibrationDataset data = load_dataset(data_path);
  check_disjoint(flow, data);
  if (b > 0) check_pvalue_floor(b, level, flow.m());

  if (!fc::global_bundle_exists(run_dir)) {
    if (!force) {
      throw fc::ConfigError(
          "no global bundle found under '" + run_dir +
          "'; the global consistency check comes first (run diagnose-global, or pass --force "
          "to proceed anyway — local analysis stays informative when the global check fails)");
    }
    std::cerr << "warning: running the local check without a prior global bundle\n";
  }

  const bool sweeping = !sweep_gain.empty();
  fc::Matrix points;
  if (sweeping) {
    double lo = 0, hi = 0;
    int steps = 0;
    if (std::sscanf(sweep_gain.c_str(), "%lf:%lf:%d", &lo, &hi, &steps) != 3 || steps < 1)
      throw fc::ConfigError("--sweep-gain expects lo:hi:steps");
    fc::Vector gs(steps);
    for (int i = 0; i < steps; ++i)
      gs[i] = steps == 1 ? lo : lo + (hi - lo) * i / (steps - 1);
    points = fc::gain_sweep_observations(task.gain(), gs, sweep_mu0, sweep_seed);
    if (points.cols() != flow.d())
      throw fc::ContractError("sweep observations have dimension " +
                              std::to_string(points.cols()) + ", the flow expects d = " +
                              std::to_string(flow.d()));
  } else {
    if (points_path.empty())
      throw fc::ConfigError("diagnose-local needs --points or --sweep-gain");
    points = load_points(points_path, flow.d());
  }

  fc::PitMatrix pit = fc::pit_matrix(flow, data);
  fc::AlphaGrid grid = fc::AlphaGrid::equispaced(grid_size);
  fc::IndicatorDatasets ds = fc::build_indicator_datasets(pit, data, grid);
  fc::RegressorConfig rcfg;
  rcfg.kind = kind == "mlp" ? fc::RegressorKind::mlp : fc::RegressorKind::logistic;
  rcfg.seed = seed;
  fc::RegressorBank bank = fc::fit_bank(ds, rcfg, b, seed);
  std::vector<fc::LocalReport> reports = fc::sweep(bank, points, grid, level);
  fc::write_local_bundle(reports, points, sweeping, flow.tag(), data.tag(), run_dir);

  if (b == 0) {
    std::cout << "STATISTICS-ONLY local sweep over " << points.rows() << " points\n";
    return kExitAccept;
  }
  int rejected = 0;
  for (const auto& rep : reports) rejected += rep.reject ? 1 : 0;
  std::cout << (rejected > 0 ? "REJECT" : "ACCEPT") << " local consistency at level " << level
            << " (" << rejected << "/" << points.rows() << " evaluation points reject)\n";
  return rejected > 0 ? kExitReject : kExitAccept;
}

int cmd_independence(const std::string& flow_path, const std::string& data_path,
                     const std::string& run_dir, int b, double level, std::uint64_t seed,
                     const std::string& x0_csv, int k) {
  check_level(level);
  fc::ConditionalFlow flow = fc::ConditionalFlow::load(flow_path);
  fc::CalibrationDataset data = load_dataset(data_path);
  check_disjoint(flow, data);

  fc::PitMatrix pit = fc::pit_matrix(flow, data);
  fc::Matrix z = fc::normal_scores(pit);

  // warn (not fail) when the per-covariate uniformity was already rejected
  fc::GlobalReport uni = fc::global_test(pit, fc::AlphaGrid::equispaced(100), level,
                                         std::max(99, static_cast<int>(flow.m() / level)), seed);

  fc::CovarianceReport report;
  std::string name;
  if (x0_csv.empty()) {
    report = fc::global_independence(z, b, seed + 1, !uni.reject);
    name = "global";
  } else {
    fc::Vector x0;
    std::stringstream ss(x0_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) x0.push_back(std::strtod(cell.c_str(), nullptr));
    if (k <= 0) k = std::max(10 * flow.m(), data.n() / 10);
    report = fc::local_independence(z, data.x, x0, k, b, seed + 1);
    if (uni.reject)
      report.warnings.push_back("per-covariate uniformity was rejected upstream");
    name = "local";
  }
  fc::write_independence_report(report, level, run_dir, name);

  std::cout << (report.p < level ? "REJECT" : "ACCEPT") << " score independence (" << report.mode
            << ", statistic " << report.stat << ", p " << report.p << ")\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "note: " << report.caveat << "\n";
  return report.p < level ? kExitReject : kExitAccept;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowcheck: multivariate PIT consistency diagnostics for conditional "
               "normalizing-flow posterior estimators"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware)")->default_val(0);

  // simulate ---------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Draw (x, theta) pairs from a benchmark task");
  sim->set_config("--config", "", "JSON key/value config file");
  TaskOptions sim_task;
  sim_task.add_options(sim);
  int sim_n = 10000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  bool sim_binary = false;
  sim->add_option("--n", sim_n, "Number of joint draws")->default_val(10000);
  sim->add_option("--seed", sim_seed, "Simulation seed")->default_val(1);
  sim->add_option("--out", sim_out, "Output dataset file")->required();
  sim->add_flag("--binary", sim_binary, "Write the compact FCK1 binary mirror");

  // train --------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Maximum-likelihood fit of a flow on a dataset");
  train->set_config("--config", "", "JSON key/value config file");
  std::string train_data, train_out;
  fc::FlowTrainConfig tcfg;
  train->add_option("--data", train_data, "Training dataset (never reuse for calibration)")
      ->required();
  train->add_option("--out", train_out, "Output flow file")->required();
  train->add_option("--layers", tcfg.layers, "Affine autoregressive layers")->default_val(2);
  train->add_option("--hidden", tcfg.hidden, "Conditioner hidden width (0 = affine)")
      ->default_val(16);
  train->add_option("--ctx-dim", tcfg.ctx_dim, "Context embedding size (0 = identity)")
      ->default_val(0);
  train->add_option("--ctx-hidden", tcfg.ctx_hidden, "Context net hidden width")->default_val(16);
  train->add_option("--lr", tcfg.learning_rate, "Adam learning rate")->default_val(5e-3);
  train->add_option("--batch", tcfg.batch_size, "Batch size")->default_val(128);
  train->add_option("--epochs", tcfg.epochs, "Epoch budget")->default_val(200);
  train->add_option("--val-frac", tcfg.validation_fraction, "Validation fraction in [0, 0.5]")
      ->default_val(0.1);
  train->add_option("--patience", tcfg.patience, "Early-stop patience (epochs)")->default_val(12);
  train->add_option("--seed", tcfg.seed, "Training seed")->default_val(1);

  // oracle / pilot -----------------------------------------------------------
  auto* oracle = app.add_subcommand("oracle", "Analytic-posterior flow for the gaussian-linear task");
  oracle->set_config("--config", "", "JSON key/value config file");
  TaskOptions oracle_task;
  oracle_task.add_options(oracle);
  InjectOptions oracle_inject;
  oracle_inject.add_options(oracle);
  std::string oracle_out;
  oracle->add_option("--out", oracle_out, "Output flow file")->required();

  auto* pilot = app.add_subcommand("pilot", "Closed-form affine-Gaussian reference fit for the gain toy");
  pilot->set_config("--config", "", "JSON key/value config file");
  TaskOptions pilot_task;
  pilot_task.add_options(pilot);
  InjectOptions pilot_inject;
  pilot_inject.add_options(pilot);
  int pilot_n = 10000;
  std::uint64_t pilot_seed = 1;
  double pilot_coupling = 0.0;
  std::string pilot_out;
  pilot->add_option("--pilot-n", pilot_n, "Pilot simulation size")->default_val(10000);
  pilot->add_option("--seed", pilot_seed, "Pilot seed")->default_val(1);
  pilot->add_option("--coupling", pilot_coupling,
                    "Gain-coupled dispersion strength (0 = calibrated pilot)")
      ->default_val(0.0);
  pilot->add_option("--out", pilot_out, "Output flow file")->required();

  // diagnose-global ----------------------------------------------------------
  auto* dg = app.add_subcommand("diagnose-global",
                                "Workflow step 1: global PIT uniformity per covariate");
  dg->set_config("--config", "", "JSON key/value config file");
  std::string dg_flow, dg_data, dg_out;
  int dg_grid = 100, dg_b = 99, dg_sbc_draws = 100;
  double dg_level = 0.05;
  std::uint64_t dg_seed = 1;
  bool dg_no_sbc = false;
  dg->add_option("--flow", dg_flow, "Flow file under test")->required();
  dg->add_option("--data", dg_data, "Calibration dataset (disjoint from training)")->required();
  dg->add_option("--out", dg_out, "Run directory for the report bundle")->required();
  dg->add_option("--grid", dg_grid, "Alpha-grid size")->default_val(100);
  dg->add_option("--level", dg_level, "Test level before Bonferroni")->default_val(0.05);
  dg->add_option("--B", dg_b, "Null replicates")->default_val(99);
  dg->add_option("--seed", dg_seed, "Diagnostic seed")->default_val(1);
  dg->add_flag("--no-sbc", dg_no_sbc, "Skip the SBC baseline");
  dg->add_option("--sbc-draws", dg_sbc_draws, "Posterior draws per pair for SBC")
      ->default_val(100);

  // diagnose-local -----------------------------------------------------------
  auto* dl = app.add_subcommand("diagnose-local",
                                "Workflow step 2: local coverage tests at evaluation points");
  dl->set_config("--config", "", "JSON key/value config file");
  std::string dl_flow, dl_data, dl_out, dl_points, dl_sweep, dl_kind = "logistic";
  int dl_grid = 100, dl_b = 99;
  double dl_level = 0.05, dl_mu0 = 1.0;
  std::uint64_t dl_seed = 1, dl_sweep_seed = 1;
  bool dl_force = false;
  TaskOptions dl_task;
  dl_task.task = "gain-toy";
  dl->add_option("--flow", dl_flow, "Flow file under test")->required();
  dl->add_option("--data", dl_data, "Calibration dataset (disjoint from training)")->required();
  dl->add_option("--out", dl_out, "Run directory for the report bundle")->required();
  dl->add_option("--points", dl_points, "Evaluation points file (x_1..x_d columns)");
  dl->add_option("--sweep-gain", dl_sweep, "Gain-toy sweep spec lo:hi:steps");
  dl->add_option("--sweep-mu0", dl_mu0, "Fixed latent for sweep observations")->default_val(1.0);
  dl->add_option("--sweep-seed", dl_sweep_seed, "Noise seed for sweep observations")
      ->default_val(1);
  dl->add_option("--gain-d", dl_task.gain_d, "Observation dimension (gain-toy sweep)")
      ->default_val(16);
  dl->add_option("--g-max", dl_task.g_max, "Gain prior half-range (gain-toy sweep)")
      ->default_val(20.0);
  dl->add_option("--noise-sd", dl_task.noise_sd, "Template noise sd (gain-toy sweep)")
      ->default_val(0.25);
  dl->add_option("--grid", dl_grid, "Alpha-grid size")->default_val(100);
  dl->add_option("--level", dl_level, "Test level before Bonferroni")->default_val(0.05);
  dl->add_option("--B", dl_b, "Null bank replicates (0 = statistics only)")->default_val(99);
  dl->add_option("--kind", dl_kind, "Regressor kind: logistic or mlp")
      ->check(CLI::IsMember({"logistic", "mlp"}))
      ->default_val("logistic");
  dl->add_option("--seed", dl_seed, "Bank-fitting seed")->default_val(1);
  dl->add_flag("--force", dl_force, "Run without a prior global bundle");

  // independence ---------------------------------------------------------------
  auto* ind = app.add_subcommand("independence",
                                 "Identity-covariance check of the normal scores");
  ind->set_config("--config", "", "JSON key/value config file");
  std::string ind_flow, ind_data, ind_out, ind_x0;
  int ind_b = 999, ind_k = 0;
  double ind_level = 0.05;
  std::uint64_t ind_seed = 1;
  ind->add_option("--flow", ind_flow, "Flow file under test")->required();
  ind->add_option("--data", ind_data, "Calibration dataset (disjoint from training)")->required();
  ind->add_option("--out", ind_out, "Run directory for the report bundle")->required();
  ind->add_option("--B", ind_b, "Null replicates")->default_val(999);
  ind->add_option("--level", ind_level, "Test level")->default_val(0.05);
  ind->add_option("--seed", ind_seed, "Diagnostic seed")->default_val(1);
  ind->add_option("--x0", ind_x0, "Local mode: comma-separated evaluation point");
  ind->add_option("--k", ind_k, "Local mode: neighborhood size (0 = max(10m, N/10))")
      ->default_val(0);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  fc::set_default_threads(threads);
  try {
    if (sim->parsed()) return cmd_simulate(sim_task, sim_n, sim_seed, sim_out, sim_binary);
    if (train->parsed()) return cmd_train(train_data, tcfg, train_out);
    if (oracle->parsed()) return cmd_oracle(oracle_task, oracle_inject, oracle_out);
    if (pilot->parsed())
      return cmd_pilot(pilot_task, pilot_inject, pilot_n, pilot_seed, pilot_coupling, pilot_out);
    if (dg->parsed())
      return cmd_diagnose_global(dg_flow, dg_data, dg_out, dg_grid, dg_level, dg_b, dg_seed,
                                 !dg_no_sbc, dg_sbc_draws);
    if (dl->parsed())
      return cmd_diagnose_local(dl_flow, dl_data, dl_out, dl_points, dl_sweep, dl_mu0,
                                dl_sweep_seed, dl_task, dl_grid, dl_level, dl_b, dl_kind, dl_seed,
                                dl_force);
    if (ind->parsed())
      return cmd_independence(ind_flow, ind_data, ind_out, ind_b, ind_level, ind_seed, ind_x0,
                              ind_k);
  } catch (const fc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fc::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
