#include "flowcheck/bundle.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "flowcheck/errors.hpp"

namespace flowcheck {

namespace {

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open report file for writing: " + path.string());
  out << j.dump(2) << "\n";
}

nlohmann::json covariate_entries(const Vector& stats, const Vector& p_raw, const Vector& p_adj,
                                 double level) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    nlohmann::json e;
    e["name"] = "P_" + std::to_string(i + 1);
    e["statistic"] = stats[i];
    if (i < p_raw.size()) {
      e["p_raw"] = p_raw[i];
      e["p_adj"] = p_adj[i];
      e["reject"] = p_adj[i] < level;
    }
    arr.push_back(e);
  }
  return arr;
}

}  // namespace

void write_global_bundle(const GlobalReport& report, const std::optional<SbcSummary>& sbc,
                         const std::string& flow_tag, const std::string& data_tag,
                         long clip_count, const std::filesystem::path& run_dir) {
  const auto dir = run_dir / "global";
  std::filesystem::create_directories(dir);

  nlohmann::json j;
  j["check"] = "global-consistency";
  j["flow"] = flow_tag;
  j["dataset"] = data_tag;
  j["n"] = report.n;
  j["grid_size"] = report.grid.size();
  j["level"] = report.level;
  j["b_replicates"] = report.b_replicates;
  j["seed"] = report.seed;
  j["pit_clip_count"] = clip_count;
  j["covariates"] = covariate_entries(report.stats, report.p_raw, report.p_adj, report.level);
  j["decision"] = report.reject ? "REJECT" : "ACCEPT";
  if (sbc) {
    nlohmann::json s;
    s["draws"] = sbc->draws;
    s["level"] = sbc->level;
    nlohmann::json ps = nlohmann::json::array();
    for (std::size_t i = 0; i < sbc->p_values.size(); ++i)
      ps.push_back({{"name", "theta_" + std::to_string(i + 1)}, {"p", sbc->p_values[i]}});
    s["p_values"] = ps;
    s["decision"] = sbc->reject ? "REJECT" : "ACCEPT";
    j["sbc"] = s;
  }
  write_json(j, dir / "summary.json");
  emit_ppplot(report, dir);
}

void write_local_bundle(const std::vector<LocalReport>& reports, const Matrix& points,
                        bool from_sweep, const std::string& flow_tag,
                        const std::string& data_tag, const std::filesystem::path& run_dir) {
  require_dim(reports.size(), points.rows(), "write_local_bundle");
  const auto dir = run_dir / "local";
  std::filesystem::create_directories(dir);

  nlohmann::json j;
  j["check"] = "local-consistency";
  j["flow"] = flow_tag;
  j["dataset"] = data_tag;
  j["evaluation_points"] = points.rows();
  bool any_reject = false;
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const LocalReport& rep = reports[r];
    nlohmann::json e;
    e["x"] = rep.x;
    e["covariates"] = covariate_entries(rep.stats, rep.p_raw, rep.p_adj, rep.level);
    if (rep.has_pvalues) {
      e["decision"] = rep.reject ? "REJECT" : "ACCEPT";
      any_reject = any_reject || rep.reject;
    } else {
      e["decision"] = "STATISTICS-ONLY";
    }
    pts.push_back(e);
  }
  j["points"] = pts;
  if (!reports.empty()) {
    j["level"] = reports[0].level;
    j["grid_size"] = reports[0].grid.size();
    j["has_pvalues"] = reports[0].has_pvalues;
  }
  j["decision"] = reports.empty() || !reports[0].has_pvalues
                      ? "STATISTICS-ONLY"
                      : (any_reject ? "REJECT" : "ACCEPT");
  write_json(j, dir / "summary.json");

  if (from_sweep) emit_sweep(reports, points, dir / "sweep.csv");
  for (std::size_t r = 0; r < reports.size(); ++r) {
    char name[32];
    std::snprintf(name, sizeof(name), "point_%03zu", r);
    emit_local_ppplot(reports[r], dir / name);
  }
}

void write_independence_report(const CovarianceReport& report, double level,
                               const std::filesystem::path& run_dir, const std::string& name) {
  const auto dir = run_dir / "independence";
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["check"] = "score-independence";
  j["mode"] = report.mode;
  j["n"] = report.n;
  j["statistic"] = report.stat;
  j["p"] = report.p;
  j["level"] = level;
  j["decision"] = report.p < level ? "REJECT" : "ACCEPT";
  j["caveat"] = report.caveat;
  j["warnings"] = report.warnings;
  nlohmann::json sigma = nlohmann::json::array();
  for (int r = 0; r < report.sigma.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < report.sigma.cols(); ++c) row.push_back(report.sigma(r, c));
    sigma.push_back(row);
  }
  j["covariance"] = sigma;
  write_json(j, dir / (name + ".json"));
}

bool global_bundle_exists(const std::filesystem::path& run_dir) {
  return std::filesystem::exists(run_dir / "global" / "summary.json");
}

}  // namespace flowcheck
