#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "flowcheck/matrix.hpp"

namespace flowcheck {

// N joint draws (x_n, theta_n). The calibration_ok flag records that the pairs
// were not used to train the estimator under test; PIT computation refuses to
// run without it.
struct CalibrationDataset {
  Matrix theta;  // N x m
  Matrix x;      // N x d

  std::string task;
  std::uint64_t seed = 0;
  std::string provenance;       // "simulation" or "file:<path>"
  bool calibration_ok = false;  // disjoint from any training data

  int n() const { return theta.rows(); }
  int m() const { return theta.cols(); }
  int d() const { return x.cols(); }

  // Identity string used by the training/diagnosis leakage check.
  std::string tag() const {
    return task + ":" + std::to_string(seed) + ":" + std::to_string(n());
  }

  void validate() const {
    if (theta.rows() != x.rows()) throw ContractError("CalibrationDataset: row count mismatch");
    require_finite(theta.data(), "CalibrationDataset theta");
    require_finite(x.data(), "CalibrationDataset x");
  }
};

// Text columnar format: comment header lines ("# key: value"), then a
// "theta_1,...,theta_m,x_1,...,x_d" header row, one CSV row per pair.
void save_dataset_csv(const CalibrationDataset& data, const std::filesystem::path& path);
CalibrationDataset load_dataset_csv(const std::filesystem::path& path);

// Compact binary mirror: magic "FCK1", then three little-endian u32 (n, m, d),
// then n*(m+d) little-endian doubles, row-major theta|x.
void save_dataset_binary(const CalibrationDataset& data, const std::filesystem::path& path);
CalibrationDataset load_dataset_binary(const std::filesystem::path& path);

}  // namespace flowcheck
