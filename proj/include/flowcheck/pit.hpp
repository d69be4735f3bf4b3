#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "flowcheck/dataset.hpp"
#include "flowcheck/flow.hpp"

namespace flowcheck {

// N x m matrix of PIT covariates, each strictly inside (0,1). Covariates are
// indexed by base-space coordinate of the composed transform (P_1..P_m), not
// by parameter coordinate: with inter-layer orderings there is no 1-1 map back
// to theta components.
struct PitMatrix {
  Matrix values;
  std::string provenance;  // flow tag + dataset tag
  long clip_count = 0;     // entries clipped into [eps, 1-eps]

  int n() const { return values.rows(); }
  int m() const { return values.cols(); }
};

inline constexpr double kPitClipEps = 1e-12;

// PIT_m(theta, x): coordinate i is normal_cdf of the i-th inverse-transform
// coordinate. Entries are clipped to [eps, 1-eps]; clips increment *clip_count
// when provided.
Vector compute_pit(const ConditionalFlow& flow, const Vector& theta, const Vector& x,
                   long* clip_count = nullptr);

// Row n is compute_pit on pair n. Requires data.calibration_ok — refuses to
// run on data not marked disjoint from the flow's training set.
PitMatrix pit_matrix(const ConditionalFlow& flow, const CalibrationDataset& data);

// Entry-wise normal quantile. Positions that sit at the clip boundary are
// reported through *clipped when provided.
Matrix normal_scores(const PitMatrix& pit, std::vector<std::pair<int, int>>* clipped = nullptr);

// Columnar text export: provenance comment, then header pit_1..pit_m.
void save_pit_matrix(const PitMatrix& pit, const std::filesystem::path& path);

}  // namespace flowcheck
