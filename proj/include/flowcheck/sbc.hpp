#pragma once

#include <cstdint>
#include <vector>

#include "flowcheck/dataset.hpp"
#include "flowcheck/flow.hpp"

namespace flowcheck {

// Rank statistics per calibration pair and parameter coordinate: the count of
// L posterior draws below the true value. Marginally uniform over {0..L} when
// the estimator's 1-d marginals are calibrated.
struct SbcRanks {
  std::vector<int> ranks;  // row-major n x m
  int n = 0, m = 0, L = 0;

  int operator()(int row, int col) const { return ranks[static_cast<std::size_t>(row) * m + col]; }
};

SbcRanks sbc_ranks(const ConditionalFlow& flow, const CalibrationDataset& data, int L,
                   std::uint64_t seed);

// Chi-squared uniformity p-value of one coordinate's rank histogram.
double sbc_chi2_pvalue(const SbcRanks& ranks, int coord, int n_bins = 20);

}  // namespace flowcheck
