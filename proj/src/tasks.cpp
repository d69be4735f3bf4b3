#include "flowcheck/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "flowcheck/errors.hpp"
#include "flowcheck/rng.hpp"

namespace flowcheck {

GaussianLinearTask GaussianLinearTask::identity(int m, double sigma) {
  GaussianLinearTask t;
  t.m = m;
  t.d = m;
  t.sigma = sigma;
  t.a = Matrix(m, m);
  for (int i = 0; i < m; ++i) t.a(i, i) = 1.0;
  return t;
}

GaussianLinearTask GaussianLinearTask::stacked(int m, int d, double sigma) {
  if (d < m) throw ContractError("GaussianLinearTask::stacked: need d >= m");
  GaussianLinearTask t;
  t.m = m;
  t.d = d;
  t.sigma = sigma;
  t.a = Matrix(d, m);
  for (int i = 0; i < m; ++i) t.a(i, i) = 1.0;
  for (int r = m; r < d; ++r) t.a(r, (r - m) % m) = 0.5 + 0.1 * ((r - m) % 3);
  return t;
}

Matrix GaussianLinearTask::posterior_cov() const {
  // (I + A'A / sigma^2)^-1
  Matrix prec(m, m);
  for (int i = 0; i < m; ++i) prec(i, i) = 1.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int r = 0; r < d; ++r) s += a(r, i) * a(r, j);
      prec(i, j) += s / (sigma * sigma);
    }
  return spd_inverse(prec);
}

Vector GaussianLinearTask::posterior_mean(const Vector& x) const {
  require_dim(x.size(), d, "posterior_mean x");
  Matrix cov = posterior_cov();
  Vector atx(m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int r = 0; r < d; ++r) atx[i] += a(r, i) * x[r];
  Vector mu(m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) mu[i] += cov(i, j) * atx[j] / (sigma * sigma);
  return mu;
}

CalibrationDataset simulate(const GaussianLinearTask& task, int n, std::uint64_t seed) {
  if (n < 1) throw ContractError("simulate: n must be positive");
  CalibrationDataset data;
  data.task = "gaussian-linear";
  data.seed = seed;
  data.provenance = "simulation";
  data.calibration_ok = true;
  data.theta = Matrix(n, task.m);
  data.x = Matrix(n, task.d);
  RngStream rng(seed, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < task.m; ++c) data.theta(r, c) = rng.normal();
    for (int c = 0; c < task.d; ++c) {
      double mean = 0.0;
      for (int j = 0; j < task.m; ++j) mean += task.a(c, j) * data.theta(r, j);
      data.x(r, c) = mean + task.sigma * rng.normal();
    }
  }
  return data;
}

Vector GainToyTask::unit_template() const {
  return Vector(d, 1.0 / std::sqrt(static_cast<double>(d)));
}

double GainToyTask::template_response_sd() const {
  // s'x = g (mu + s'eps): var = E[g^2] (E[mu^2] + noise_sd^2)
  const double eg2 = g_max * g_max / 3.0;
  const double emu2 = (mu_lo * mu_lo + mu_lo * mu_hi + mu_hi * mu_hi) / 3.0;
  return std::sqrt(eg2 * (emu2 + noise_sd * noise_sd));
}

CalibrationDataset simulate(const GainToyTask& task, int n, std::uint64_t seed) {
  if (n < 1) throw ContractError("simulate: n must be positive");
  if (task.mu_lo >= task.mu_hi || task.g_max <= 0 || task.noise_sd <= 0)
    throw ContractError("GainToyTask: invalid prior box");
  CalibrationDataset data;
  data.task = "gain-toy";
  data.seed = seed;
  data.provenance = "simulation";
  data.calibration_ok = true;
  data.theta = Matrix(n, 2);
  data.x = Matrix(n, task.d);
  const Vector s = task.unit_template();
  RngStream rng(seed, 0);
  for (int r = 0; r < n; ++r) {
    const double mu = rng.uniform(task.mu_lo, task.mu_hi);
    const double g = rng.uniform(-task.g_max, task.g_max);
    data.theta(r, 0) = mu;
    data.theta(r, 1) = g;
    for (int c = 0; c < task.d; ++c)
      data.x(r, c) = g * (mu * s[c] + task.noise_sd * rng.normal());
  }
  return data;
}

ConditionalFlow oracle_flow(const GaussianLinearTask& task) {
  Matrix cov = task.posterior_cov();
  // mean map W = cov A' / sigma^2
  Matrix w(task.m, task.d);
  for (int i = 0; i < task.m; ++i)
    for (int c = 0; c < task.d; ++c) {
      double s = 0.0;
      for (int j = 0; j < task.m; ++j) s += cov(i, j) * task.a(c, j);
      w(i, c) = s / (task.sigma * task.sigma);
    }
  return affine_gaussian_flow(w, Vector(task.m, 0.0), cov);
}

void MiscalibrationSpec::validate(int m, int d) const {
  if (coords.empty()) throw ContractError("MiscalibrationSpec: no target coordinates");
  for (int c : coords)
    if (c < 0 || c >= m) throw ContractError("MiscalibrationSpec: target coordinate out of range");
  if (kind == Kind::dispersion && magnitude <= 0)
    throw ContractError("MiscalibrationSpec: dispersion factor must be positive");
  if (kind == Kind::sign_bias && (sign_coord < 0 || sign_coord >= d))
    throw ContractError("MiscalibrationSpec: sign coordinate out of range");
}

ConditionalFlow inject(const ConditionalFlow& flow, const MiscalibrationSpec& spec) {
  spec.validate(flow.m(), flow.d());
  ConditionalFlow out = flow;
  switch (spec.kind) {
    case MiscalibrationSpec::Kind::bias:
      for (int c : spec.coords) out.output_bias()[c] += spec.magnitude;
      break;
    case MiscalibrationSpec::Kind::sign_bias:
      for (int c : spec.coords) out.output_sign_bias()[c] += spec.magnitude;
      out.sign_coord() = spec.sign_coord;
      break;
    case MiscalibrationSpec::Kind::dispersion:
      // multiply the conditional scales of the targeted output coordinates in
      // the outermost layer
      for (int c : spec.coords)
        out.layers().back().scale_offset[c] += std::log(spec.magnitude);
      break;
  }
  return out;
}

ConditionalFlow gain_toy_pilot_flow(const GainToyTask& task, int pilot_n, std::uint64_t seed,
                                    double coupling, const std::vector<int>& coupled_coords) {
  if (pilot_n < task.d + 2) throw ContractError("gain_toy_pilot_flow: pilot sample too small");
  CalibrationDataset pilot = simulate(task, pilot_n, seed);
  const int n = pilot.n(), d = task.d, m = 2;

  // ordinary least squares theta ~ [x, 1], coordinate by coordinate
  Matrix xtx(d + 1, d + 1);
  for (int r = 0; r < n; ++r) {
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) xtx(a, b) += pilot.x(r, a) * pilot.x(r, b);
      xtx(a, d) += pilot.x(r, a);
    }
  }
  xtx(d, d) = n;
  for (int a = 0; a <= d; ++a)
    for (int b = 0; b < a; ++b) xtx(a, b) = xtx(b, a);
  for (int a = 0; a <= d; ++a) xtx(a, a) += 1e-9 * n;  // ridge jitter for the solve

  Matrix w(m, d);
  Vector bias(m);
  Matrix resid(n, m);
  for (int i = 0; i < m; ++i) {
    Vector xty(d + 1, 0.0);
    for (int r = 0; r < n; ++r) {
      for (int a = 0; a < d; ++a) xty[a] += pilot.x(r, a) * pilot.theta(r, i);
      xty[d] += pilot.theta(r, i);
    }
    Vector beta = spd_solve(xtx, xty);
    for (int a = 0; a < d; ++a) w(i, a) = beta[a];
    bias[i] = beta[d];
    for (int r = 0; r < n; ++r) {
      double fit = beta[d];
      for (int a = 0; a < d; ++a) fit += beta[a] * pilot.x(r, a);
      resid(r, i) = pilot.theta(r, i) - fit;
    }
  }
  Matrix sigma(m, m);
  for (int r = 0; r < n; ++r)
    for (int a = 0; a < m; ++a)
      for (int b = a; b < m; ++b) sigma(a, b) += resid(r, a) * resid(r, b);
  for (int a = 0; a < m; ++a)
    for (int b = a; b < m; ++b) {
      sigma(a, b) /= n;
      sigma(b, a) = sigma(a, b);
    }

  ConditionalFlow flow = affine_gaussian_flow(w, bias, sigma);

  if (coupling != 0.0) {
    // dispersion coupled to the recoverable gain: log-scale of the targeted
    // coordinates gains a term coupling * (s'x) / sd(s'x); the linear
    // conditioner's log-scale row hosts it exactly
    const Vector s = task.unit_template();
    const double scale = coupling / task.template_response_sd();
    AffineLayer& layer = flow.layers()[0];
    for (int i : coupled_coords) {
      if (i < 0 || i >= m) throw ContractError("gain_toy_pilot_flow: coupled coordinate out of range");
      const int in_dim = i + d;
      std::span<double> p = std::span<double>(flow.params())
                                .subspan(layer.param_off[i], layer.cond[i].n_params());
      // log-scale row weights sit after the shift row: [mu row | s row | biases]
      for (int c = 0; c < d; ++c) p[in_dim + i + c] += scale * s[c];
    }
  }
  flow.train_seed = seed;
  flow.train_data_tag = pilot.tag();
  return flow;
}

Matrix gain_sweep_observations(const GainToyTask& task, const Vector& g_values, double mu0,
                               std::uint64_t seed) {
  Matrix points(static_cast<int>(g_values.size()), task.d);
  const Vector s = task.unit_template();
  RngStream rng(seed, 0);
  for (std::size_t r = 0; r < g_values.size(); ++r)
    for (int c = 0; c < task.d; ++c)
      points(static_cast<int>(r), c) = g_values[r] * (mu0 * s[c] + task.noise_sd * rng.normal());
  return points;
}

}  // namespace flowcheck
