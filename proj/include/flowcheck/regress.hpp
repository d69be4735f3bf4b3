#pragma once

#include <cstdint>
#include <vector>

#include "flowcheck/matrix.hpp"
#include "flowcheck/mlp.hpp"

namespace flowcheck {

enum class RegressorKind { logistic, mlp };

struct RegressorConfig {
  RegressorKind kind = RegressorKind::logistic;
  int hidden = 16;            // mlp only
  double learning_rate = 5e-3;  // mlp only
  int max_iter = 100;         // IRLS iterations / mlp epochs
  double tol = 1e-8;          // gradient sup-norm convergence threshold
  double l2 = 1e-4;           // ridge penalty on weights (not the intercept)
  std::uint64_t seed = 1;

  void validate() const;
};

// Binary regressor estimating P(W = 1 | x) by cross-entropy minimization.
// Features are standardized internally with statistics frozen at fit time.
// Logistic fits are exact Newton solves of a convex objective and need no
// randomness; the MLP variant is seeded mini-batch Adam.
class BinaryRegressor {
public:
  static BinaryRegressor fit(const Matrix& features, const std::vector<std::uint8_t>& targets,
                             const RegressorConfig& cfg);

  double predict_proba(const Vector& x) const;

  bool degenerate() const { return degenerate_; }
  RegressorKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(mean_.size()); }

private:
  RegressorKind kind_ = RegressorKind::logistic;
  bool degenerate_ = false;
  double constant_ = 0.5;  // used when degenerate

  Vector mean_, inv_sd_;  // standardization statistics

  Vector weights_;  // logistic: [w (d), b]
  Mlp net_;         // mlp shape
  Vector net_params_;
};

}  // namespace flowcheck
