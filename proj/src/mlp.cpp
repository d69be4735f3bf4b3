#include "flowcheck/mlp.hpp"

#include <cmath>

namespace flowcheck {

void Mlp::init(std::span<double> params, RngStream& rng, bool zero_output) const {
  require_dim(params.size(), n_params(), "Mlp::init");
  if (hidden == 0) {
    double s = 1.0 / std::sqrt(std::max(1, in_dim));
    for (int i = 0; i < out_dim * in_dim; ++i) params[i] = zero_output ? 0.0 : s * rng.normal();
    for (int i = 0; i < out_dim; ++i) params[out_dim * in_dim + i] = 0.0;
    return;
  }
  double s1 = 1.0 / std::sqrt(std::max(1, in_dim));
  double s2 = 1.0 / std::sqrt(hidden);
  std::size_t p = 0;
  for (int i = 0; i < hidden * in_dim; ++i) params[p++] = s1 * rng.normal();
  for (int i = 0; i < hidden; ++i) params[p++] = 0.0;
  for (int i = 0; i < out_dim * hidden; ++i) params[p++] = zero_output ? 0.0 : s2 * rng.normal();
  for (int i = 0; i < out_dim; ++i) params[p++] = 0.0;
}

void Mlp::eval(std::span<const double> params, std::span<const double> in,
               std::span<double> out) const {
  require_dim(params.size(), n_params(), "Mlp::eval params");
  require_dim(in.size(), in_dim, "Mlp::eval input");
  require_dim(out.size(), out_dim, "Mlp::eval output");
  if (hidden == 0) {
    const double* w = params.data();
    const double* b = params.data() + out_dim * in_dim;
    for (int o = 0; o < out_dim; ++o) {
      double s = b[o];
      for (int i = 0; i < in_dim; ++i) s += w[o * in_dim + i] * in[i];
      out[o] = s;
    }
    return;
  }
  const double* w1 = params.data();
  const double* b1 = w1 + hidden * in_dim;
  const double* w2 = b1 + hidden;
  const double* b2 = w2 + out_dim * hidden;
  std::vector<double> h(hidden);
  for (int j = 0; j < hidden; ++j) {
    double s = b1[j];
    for (int i = 0; i < in_dim; ++i) s += w1[j * in_dim + i] * in[i];
    h[j] = std::tanh(s);
  }
  for (int o = 0; o < out_dim; ++o) {
    double s = b2[o];
    for (int j = 0; j < hidden; ++j) s += w2[o * hidden + j] * h[j];
    out[o] = s;
  }
}

void Mlp::eval_tape(Tape& tape, std::span<const Tape::Var> params,
                    std::span<const Tape::Var> in, std::span<Tape::Var> out) const {
  require_dim(params.size(), n_params(), "Mlp::eval_tape params");
  require_dim(in.size(), in_dim, "Mlp::eval_tape input");
  require_dim(out.size(), out_dim, "Mlp::eval_tape output");
  if (hidden == 0) {
    const Tape::Var* w = params.data();
    const Tape::Var* b = params.data() + out_dim * in_dim;
    for (int o = 0; o < out_dim; ++o) {
      Tape::Var s = b[o];
      for (int i = 0; i < in_dim; ++i) s = tape.add(s, tape.mul(w[o * in_dim + i], in[i]));
      out[o] = s;
    }
    return;
  }
  const Tape::Var* w1 = params.data();
  const Tape::Var* b1 = w1 + hidden * in_dim;
  const Tape::Var* w2 = b1 + hidden;
  const Tape::Var* b2 = w2 + out_dim * hidden;
  std::vector<Tape::Var> h(hidden);
  for (int j = 0; j < hidden; ++j) {
    Tape::Var s = b1[j];
    for (int i = 0; i < in_dim; ++i) s = tape.add(s, tape.mul(w1[j * in_dim + i], in[i]));
    h[j] = tape.tanh(s);
  }
  for (int o = 0; o < out_dim; ++o) {
    Tape::Var s = b2[o];
    for (int j = 0; j < hidden; ++j) s = tape.add(s, tape.mul(w2[o * hidden + j], h[j]));
    out[o] = s;
  }
}

}  // namespace flowcheck
