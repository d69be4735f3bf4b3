#pragma once

#include <cstdint>
#include <vector>

#include "flowcheck/dataset.hpp"
#include "flowcheck/flow.hpp"

namespace flowcheck {

// theta ~ N(0, I_m), x = A theta + sigma eps. The posterior is Gaussian with
// covariance (I + A'A/sigma^2)^-1 and mean cov * A'x / sigma^2, which makes
// the task an exact oracle for the whole diagnostic pipeline.
struct GaussianLinearTask {
  int m = 2, d = 2;
  Matrix a;  // d x m design
  double sigma = 1.0;

  static GaussianLinearTask identity(int m, double sigma = 1.0);
  // First m rows form the identity, remaining rows a fixed deterministic
  // pattern; keeps x informative at any d >= m.
  static GaussianLinearTask stacked(int m, int d, double sigma = 1.0);

  Matrix posterior_cov() const;              // m x m
  Vector posterior_mean(const Vector& x) const;
};

// Scalar latent mu with a positive uniform prior, gain g uniform on
// [-g_max, g_max], observation x = g * (mu * s + eps) with a fixed unit-norm
// template s. The likelihood is invariant under (g, mu) -> (c g, mu / c) up
// to noise scaling, so amplitude and gain stay coupled; |g| is recoverable
// from ||x||. theta = (mu, g).
struct GainToyTask {
  int d = 16;
  double mu_lo = 0.5, mu_hi = 1.5;
  double g_max = 20.0;
  double noise_sd = 0.25;

  Vector unit_template() const;  // s, entries 1/sqrt(d)
  double template_response_sd() const;  // sd of s'x under the joint
};

CalibrationDataset simulate(const GaussianLinearTask& task, int n, std::uint64_t seed);
CalibrationDataset simulate(const GainToyTask& task, int n, std::uint64_t seed);

// Flow whose single affine layer encodes the analytic posterior exactly.
ConditionalFlow oracle_flow(const GaussianLinearTask& task);

// Controlled miscalibration wrappers around an existing flow.
struct MiscalibrationSpec {
  enum class Kind { bias, dispersion, sign_bias };
  Kind kind = Kind::bias;
  double magnitude = 0.0;        // bias delta, dispersion gamma, or sign-bias delta
  std::vector<int> coords;       // targeted theta coordinates
  int sign_coord = 0;            // x coordinate whose sign drives sign_bias

  void validate(int m, int d) const;
};

ConditionalFlow inject(const ConditionalFlow& flow, const MiscalibrationSpec& spec);

// Reference estimator for the gain toy: closed-form maximum-likelihood fit of
// theta | x ~ N(Wx + b, Sigma) on a seeded pilot simulation. coupling > 0
// additionally tilts the conditional log-scales of the targeted coordinates
// by coupling * (s'x) / sd(s'x), a dispersion error that grows with the
// recoverable gain and vanishes at g = 0.
ConditionalFlow gain_toy_pilot_flow(const GainToyTask& task, int pilot_n, std::uint64_t seed,
                                    double coupling = 0.0,
                                    const std::vector<int>& coupled_coords = {0, 1});

// Observations along a gain path: x = g * (mu0 * s + eps), fresh noise per
// point. Row order follows g_values.
Matrix gain_sweep_observations(const GainToyTask& task, const Vector& g_values, double mu0,
                               std::uint64_t seed);

}  // namespace flowcheck
