#pragma once

#include <cstdint>

#include "flowcheck/dataset.hpp"
#include "flowcheck/flow.hpp"

namespace flowcheck {

struct FlowTrainConfig {
  int layers = 2;
  int hidden = 16;       // conditioner hidden width; 0 → affine conditioners
  int ctx_dim = 0;       // 0 → identity context (x passed through)
  int ctx_hidden = 16;   // hidden width of the context embedding when ctx_dim > 0
  double learning_rate = 5e-3;
  int batch_size = 128;
  int epochs = 200;
  double validation_fraction = 0.1;  // in [0, 0.5]
  int patience = 12;                 // epochs without smoothed-NLL improvement
  std::uint64_t seed = 1;

  void validate() const;
};

// Maximum-likelihood fit of a fresh flow on the given draws. Deterministic for
// a fixed config. Stops early once the smoothed validation NLL stops
// improving and returns the best checkpoint. Throws TrainingDivergence (with
// the epoch index) if the loss turns non-finite.
ConditionalFlow train_flow(const CalibrationDataset& train_data, const FlowTrainConfig& cfg);

// Mean negative log-likelihood of the flow on a dataset.
double mean_nll(const ConditionalFlow& flow, const CalibrationDataset& data);

}  // namespace flowcheck
