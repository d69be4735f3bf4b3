#include "flowcheck/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowcheck/errors.hpp"
#include "flowcheck/optim.hpp"
#include "flowcheck/rng.hpp"
#include "flowcheck/tape.hpp"

namespace flowcheck {

namespace {

double sigmoid(double a) {
  a = std::clamp(a, -35.0, 35.0);  // keeps outputs strictly inside (0,1)
  return 1.0 / (1.0 + std::exp(-a));
}

}  // namespace

void RegressorConfig::validate() const {
  if (hidden < 1 || max_iter < 1) throw ContractError("RegressorConfig: counts must be positive");
  if (tol <= 0) throw ContractError("RegressorConfig: tolerance must be positive");
  if (learning_rate <= 0) throw ContractError("RegressorConfig: learning rate must be positive");
  if (l2 < 0) throw ContractError("RegressorConfig: l2 penalty must be non-negative");
}

BinaryRegressor BinaryRegressor::fit(const Matrix& features,
                                     const std::vector<std::uint8_t>& targets,
                                     const RegressorConfig& cfg) {
  cfg.validate();
  const int n = features.rows();
  const int d = features.cols();
  require_dim(targets.size(), n, "BinaryRegressor::fit targets");
  if (n < 2) throw ContractError("BinaryRegressor::fit: need at least two samples");
  require_finite(features.data(), "BinaryRegressor::fit features");

  BinaryRegressor r;
  r.kind_ = cfg.kind;

  // standardization statistics from the training data
  r.mean_.assign(d, 0.0);
  r.inv_sd_.assign(d, 1.0);
  for (int c = 0; c < d; ++c) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += features(i, c);
    m /= n;
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += (features(i, c) - m) * (features(i, c) - m);
    v /= n;
    r.mean_[c] = m;
    r.inv_sd_[c] = v > 0 ? 1.0 / std::sqrt(v) : 1.0;
  }

  const long ones = std::accumulate(targets.begin(), targets.end(), 0L);
  if (ones == 0 || ones == n) {
    // single-class targets: constant regressor at the clipped empirical mean
    r.degenerate_ = true;
    r.constant_ = std::clamp(static_cast<double>(ones) / n, 1.0 / (n + 2.0),
                             1.0 - 1.0 / (n + 2.0));
    return r;
  }

  Matrix xs(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) xs(i, c) = (features(i, c) - r.mean_[c]) * r.inv_sd_[c];

  if (cfg.kind == RegressorKind::logistic) {
    // Newton (IRLS) on the ridge-penalized cross-entropy; convex, so the
    // optimum is global. Layout: beta = [w_1..w_d, intercept].
    Vector beta(d + 1, 0.0);
    Vector p(n), grad(d + 1);
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
      for (int i = 0; i < n; ++i) {
        double eta = beta[d];
        for (int c = 0; c < d; ++c) eta += beta[c] * xs(i, c);
        p[i] = sigmoid(eta);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      for (int i = 0; i < n; ++i) {
        const double e = (p[i] - targets[i]) / n;
        for (int c = 0; c < d; ++c) grad[c] += e * xs(i, c);
        grad[d] += e;
      }
      for (int c = 0; c < d; ++c) grad[c] += cfg.l2 * beta[c];
      double gmax = 0.0;
      for (double g : grad) gmax = std::max(gmax, std::fabs(g));
      if (gmax < cfg.tol) break;

      Matrix h(d + 1, d + 1);
      for (int i = 0; i < n; ++i) {
        const double w = std::max(p[i] * (1.0 - p[i]), 1e-10) / n;
        for (int a = 0; a <= d; ++a) {
          const double xa = a < d ? xs(i, a) : 1.0;
          for (int b = a; b <= d; ++b) {
            const double xb = b < d ? xs(i, b) : 1.0;
            h(a, b) += w * xa * xb;
          }
        }
      }
      for (int a = 0; a <= d; ++a)
        for (int b = 0; b < a; ++b) h(a, b) = h(b, a);
      for (int c = 0; c < d; ++c) h(c, c) += cfg.l2;
      h(d, d) += 1e-12;  // keep the solve well-posed for pathological inputs
      Vector step = spd_solve(h, grad);
      for (int c = 0; c <= d; ++c) beta[c] -= step[c];
    }
    r.weights_ = std::move(beta);
    return r;
  }

  // MLP classifier: one hidden tanh layer, trained with seeded mini-batch Adam
  // on the logit cross-entropy.
  r.net_ = Mlp(d, cfg.hidden, 1);
  r.net_params_.assign(r.net_.n_params(), 0.0);
  RngStream rng(cfg.seed, 905);
  r.net_.init(r.net_params_, rng, false);

  const int batch = std::min(128, n);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Adam opt(r.net_params_.size(), cfg.learning_rate);
  Tape tape;
  std::vector<Tape::Var> pv(r.net_params_.size());
  std::vector<Tape::Var> xin(d);
  for (int epoch = 0; epoch < cfg.max_iter; ++epoch) {
    rng.shuffle(idx);
    for (int start = 0; start + batch <= n; start += batch) {
      tape.clear();
      for (std::size_t k = 0; k < pv.size(); ++k) pv[k] = tape.input(r.net_params_[k]);
      Tape::Var loss = tape.constant(0.0);
      for (int b = 0; b < batch; ++b) {
        const int row = idx[start + b];
        for (int c = 0; c < d; ++c) xin[c] = tape.constant(xs(row, c));
        Tape::Var logit;
        r.net_.eval_tape(tape, pv, xin, {&logit, 1});
        // cross-entropy in logit form: softplus(a) - t*a
        Tape::Var term = tape.softplus(logit);
        if (targets[row]) term = tape.sub(term, logit);
        loss = tape.add(loss, term);
      }
      loss = tape.mul_const(loss, 1.0 / batch);
      Vector g = grad(tape, loss, pv);
      opt.step(r.net_params_, g);
    }
  }
  return r;
}

double BinaryRegressor::predict_proba(const Vector& x) const {
  require_dim(x.size(), mean_.size(), "predict_proba");
  require_finite(x, "predict_proba");
  if (degenerate_) return constant_;
  Vector xs(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) xs[c] = (x[c] - mean_[c]) * inv_sd_[c];
  if (kind_ == RegressorKind::logistic) {
    double eta = weights_.back();
    for (std::size_t c = 0; c < xs.size(); ++c) eta += weights_[c] * xs[c];
    return sigmoid(eta);
  }
  double logit;
  net_.eval(net_params_, xs, {&logit, 1});
  return sigmoid(logit);
}

}  // namespace flowcheck
