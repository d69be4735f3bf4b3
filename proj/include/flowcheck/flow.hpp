#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowcheck/matrix.hpp"
#include "flowcheck/mlp.hpp"
#include "flowcheck/rng.hpp"
#include "flowcheck/tape.hpp"

namespace flowcheck {

enum class ContextKind { identity, mlp };

// One conditional affine autoregressive transform. `order[r]` is the
// coordinate handled at rank r; the conditioner for rank r reads the r
// previously-ordered output coordinates plus the context vector and emits
// (shift, raw log-scale). Raw log-scales are clamped to [-7, 7]; scale_offset
// (indexed by coordinate) is added after the clamp and is how dispersion
// miscalibration gets injected.
struct AffineLayer {
  std::vector<int> order;
  std::vector<Mlp> cond;       // indexed by rank
  Vector scale_offset;         // indexed by coordinate
  std::vector<int> param_off;  // per rank, into the flow's flat parameter vector
};

struct FlowInverse {
  Vector z;
  double logdet;  // log|det J| of the theta -> z map
};

// Conditional normalizing flow q(theta|x): stacked affine autoregressive
// layers over a standard-normal base, with alternating autoregressive
// orderings between layers. The theta -> z direction is the fast one (one
// masked pass per layer); z -> theta is sequential per coordinate.
class ConditionalFlow {
public:
  // Trainable flow: MLP conditioners (hidden width `hidden`), zero-initialized
  // output layers so the fresh flow is the identity map. ctx_dim == 0 uses the
  // observation itself as context; otherwise a one-hidden-layer embedding net.
  static ConditionalFlow make(int m, int d, int n_layers, int hidden, int ctx_dim,
                              int ctx_hidden, std::uint64_t seed);

  // Single layer with affine conditioners and identity context; starts as the
  // identity map. Used by the analytic task constructors.
  static ConditionalFlow affine(int m, int d);

  int param_count() const { return static_cast<int>(params_.size()); }
  int m() const { return m_; }
  int d() const { return d_; }
  int n_layers() const { return static_cast<int>(layers_.size()); }

  Vector forward(const Vector& z, const Vector& x) const;
  FlowInverse inverse(const Vector& theta, const Vector& x) const;
  double logpdf(const Vector& theta, const Vector& x) const;
  Vector sample(RngStream& rng, const Vector& x) const;

  // Mean negative log-likelihood of a batch, recorded on a tape with the
  // parameter vars supplied by the caller. Used by train_flow.
  Tape::Var nll_on_tape(Tape& tape, std::span<const Tape::Var> pvars,
                        std::span<const double> theta, std::span<const double> x) const;

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  std::vector<AffineLayer>& layers() { return layers_; }
  const std::vector<AffineLayer>& layers() const { return layers_; }

  Vector& output_bias() { return out_bias_; }
  const Vector& output_bias() const { return out_bias_; }
  Vector& output_sign_bias() { return out_sign_bias_; }
  const Vector& output_sign_bias() const { return out_sign_bias_; }
  int& sign_coord() { return sign_coord_; }
  int sign_coord() const { return sign_coord_; }

  std::uint64_t train_seed = 0;
  std::string train_data_tag;  // identity of the training data, for leakage checks

  std::string tag() const;

  // Versioned structured-text serialization. Loading a file whose format tag
  // differs from the writer's fails loudly.
  std::string to_json_string() const;
  static ConditionalFlow from_json_string(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ConditionalFlow load(const std::filesystem::path& path);

private:
  ConditionalFlow() = default;

  static ConditionalFlow construct(int m, int d, ContextKind ctx_kind, int ctx_dim,
                                   int ctx_hidden, int cond_hidden,
                                   std::vector<std::vector<int>> orders);

  Vector context(const Vector& x) const;
  void check_orderings() const;

  int m_ = 0, d_ = 0, ctx_dim_ = 0;
  ContextKind ctx_kind_ = ContextKind::identity;
  Mlp ctx_net_;
  int ctx_param_off_ = 0;
  int cond_hidden_ = 0;  // hyperparameter record; 0 → affine conditioners
  int ctx_hidden_ = 0;
  std::vector<AffineLayer> layers_;
  Vector params_;
  Vector out_bias_;       // additive output perturbation (theta space)
  Vector out_sign_bias_;  // times sign(x[sign_coord_])
  int sign_coord_ = 0;

  friend ConditionalFlow affine_gaussian_flow(const Matrix&, const Vector&, const Matrix&);
};

// Encodes theta = b + W x + L z exactly, with L the Cholesky factor of sigma.
// The flow's log-density equals the N(b + W x, sigma) log-density.
ConditionalFlow affine_gaussian_flow(const Matrix& w, const Vector& b, const Matrix& sigma);

}  // namespace flowcheck
