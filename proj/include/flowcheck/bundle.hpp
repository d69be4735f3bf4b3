#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowcheck/global_diag.hpp"
#include "flowcheck/independence.hpp"
#include "flowcheck/local_diag.hpp"
#include "flowcheck/sbc.hpp"

namespace flowcheck {

// Report bundles: a run directory with a summary.json per check plus plot-data
// files under stable names, written deterministically so re-runs are
// byte-identical and CI can diff them.
//
//   <run>/global/summary.json, ppplot_p<i>.csv
//   <run>/local/summary.json, sweep.csv, point_<k>/ppplot_p<i>.csv
//   <run>/independence/<mode>.json

struct SbcSummary {
  int draws = 0;
  Vector p_values;  // per parameter coordinate
  double level = 0.05;
  bool reject = false;
};

void write_global_bundle(const GlobalReport& report, const std::optional<SbcSummary>& sbc,
                         const std::string& flow_tag, const std::string& data_tag,
                         long clip_count, const std::filesystem::path& run_dir);

void write_local_bundle(const std::vector<LocalReport>& reports, const Matrix& points,
                        bool from_sweep, const std::string& flow_tag,
                        const std::string& data_tag, const std::filesystem::path& run_dir);

void write_independence_report(const CovarianceReport& report, double level,
                               const std::filesystem::path& run_dir,
                               const std::string& name);

bool global_bundle_exists(const std::filesystem::path& run_dir);

}  // namespace flowcheck
