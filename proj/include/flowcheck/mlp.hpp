#pragma once

#include <span>
#include <vector>

#include "flowcheck/rng.hpp"
#include "flowcheck/tape.hpp"

namespace flowcheck {

// Shape descriptor and evaluator for a one-hidden-layer tanh perceptron.
// hidden == 0 degenerates to a plain affine map. Parameters live in an
// external flat array so several nets can share one trainable vector.
// Layout: [W1 (h x in) row-major, b1 (h), W2 (out x h), b2 (out)]
// or, affine: [W (out x in), b (out)].
struct Mlp {
  int in_dim = 0;
  int hidden = 0;
  int out_dim = 0;

  Mlp() = default;
  Mlp(int in, int h, int out) : in_dim(in), hidden(h), out_dim(out) {}

  int n_params() const {
    if (hidden == 0) return out_dim * (in_dim + 1);
    return hidden * (in_dim + 1) + out_dim * (hidden + 1);
  }

  // Random init scaled by 1/sqrt(fan-in); zero_output zeroes the output layer
  // so the net starts as the constant-zero function.
  void init(std::span<double> params, RngStream& rng, bool zero_output) const;

  void eval(std::span<const double> params, std::span<const double> in,
            std::span<double> out) const;

  void eval_tape(Tape& tape, std::span<const Tape::Var> params,
                 std::span<const Tape::Var> in, std::span<Tape::Var> out) const;
};

}  // namespace flowcheck
