#include "flowcheck/flow_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowcheck/errors.hpp"
#include "flowcheck/optim.hpp"
#include "flowcheck/tape.hpp"

namespace flowcheck {

void FlowTrainConfig::validate() const {
  if (layers < 1 || hidden < 0 || batch_size < 1 || epochs < 0 || patience < 1)
    throw ContractError("FlowTrainConfig: counts must be positive");
  if (learning_rate <= 0) throw ContractError("FlowTrainConfig: learning rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction <= 0.5))
    throw ContractError("FlowTrainConfig: validation fraction must lie in [0, 0.5]");
}

double mean_nll(const ConditionalFlow& flow, const CalibrationDataset& data) {
  double s = 0.0;
  for (int r = 0; r < data.n(); ++r)
    s -= flow.logpdf(data.theta.row_vector(r), data.x.row_vector(r));
  return s / data.n();
}

namespace {

double subset_nll(const ConditionalFlow& flow, const CalibrationDataset& data,
                  const std::vector<int>& idx, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t k = begin; k < end; ++k)
    s -= flow.logpdf(data.theta.row_vector(idx[k]), data.x.row_vector(idx[k]));
  return s / static_cast<double>(end - begin);
}

}  // namespace

ConditionalFlow train_flow(const CalibrationDataset& train_data, const FlowTrainConfig& cfg) {
  cfg.validate();
  train_data.validate();
  const int n = train_data.n();
  if (n < cfg.batch_size)
    throw ContractError("train_flow: need at least one full batch of training pairs");

  ConditionalFlow flow = ConditionalFlow::make(train_data.m(), train_data.d(), cfg.layers,
                                               cfg.hidden, cfg.ctx_dim, cfg.ctx_hidden, cfg.seed);
  flow.train_seed = cfg.seed;
  flow.train_data_tag = train_data.tag();
  if (cfg.epochs == 0) return flow;  // identity-initialized flow, untouched

  // seeded split: tail of one shuffled index vector is the validation set
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  RngStream split_rng(cfg.seed, 903);
  split_rng.shuffle(idx);
  const std::size_t n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * n));
  const std::size_t n_train = n - n_val;
  if (n_train < static_cast<std::size_t>(cfg.batch_size))
    throw ContractError("train_flow: validation split leaves less than one training batch");
  std::vector<int> train_idx(idx.begin(), idx.begin() + n_train);

  Adam opt(flow.param_count(), cfg.learning_rate);
  RngStream shuffle_rng(cfg.seed, 904);
  Tape tape;

  Vector best_params = flow.params();
  double best_smoothed = HUGE_VAL;
  double smoothed = HUGE_VAL;
  int since_best = 0;

  std::vector<Tape::Var> pvars(flow.param_count());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx);
    for (std::size_t start = 0; start + cfg.batch_size <= n_train; start += cfg.batch_size) {
      tape.clear();
      for (int i = 0; i < flow.param_count(); ++i) pvars[i] = tape.input(flow.params()[i]);
      Tape::Var loss = tape.constant(0.0);
      for (int b = 0; b < cfg.batch_size; ++b) {
        const int row = train_idx[start + b];
        loss = tape.add(loss, flow.nll_on_tape(tape, pvars, train_data.theta.row(row),
                                               train_data.x.row(row)));
      }
      loss = tape.mul_const(loss, 1.0 / cfg.batch_size);
      if (!std::isfinite(tape.value(loss)))
        throw TrainingDivergence(epoch, "train_flow: non-finite loss at epoch " +
                                            std::to_string(epoch));
      Vector g = grad(tape, loss, pvars);
      if (!all_finite(g))
        throw TrainingDivergence(epoch, "train_flow: non-finite gradient at epoch " +
                                            std::to_string(epoch));
      opt.step(flow.params(), g);
    }

    const double monitor = n_val > 0 ? subset_nll(flow, train_data, idx, n_train, idx.size())
                                     : subset_nll(flow, train_data, idx, 0, n_train);
    if (!std::isfinite(monitor))
      throw TrainingDivergence(epoch, "train_flow: non-finite validation loss at epoch " +
                                          std::to_string(epoch));
    smoothed = smoothed == HUGE_VAL ? monitor : 0.7 * smoothed + 0.3 * monitor;
    if (smoothed < best_smoothed - 1e-6) {
      best_smoothed = smoothed;
      best_params = flow.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;  // plateau
    }
  }
  flow.params() = std::move(best_params);
  return flow;
}

}  // namespace flowcheck
