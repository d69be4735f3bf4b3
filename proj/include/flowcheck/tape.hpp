#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "flowcheck/errors.hpp"
#include "flowcheck/matrix.hpp"

namespace flowcheck {

// Reverse-mode tape for one scalar loss. Local partials are stored at record
// time, so the backward sweep is a single reverse pass over the node array.
// A tape is rebuilt per loss evaluation; there is no persistent graph.
class Tape {
public:
  using Var = std::int32_t;

  Var input(double v) { return push(v, -1, -1, 0.0, 0.0); }
  Var constant(double v) { return push(v, -1, -1, 0.0, 0.0); }

  Var add(Var a, Var b) { return push(val(a) + val(b), a, b, 1.0, 1.0); }
  Var sub(Var a, Var b) { return push(val(a) - val(b), a, b, 1.0, -1.0); }
  Var mul(Var a, Var b) { return push(val(a) * val(b), a, b, val(b), val(a)); }
  Var div(Var a, Var b) {
    double vb = val(b);
    double r = val(a) / vb;
    return push(r, a, b, 1.0 / vb, -r / vb);
  }
  Var neg(Var a) { return push(-val(a), a, -1, -1.0, 0.0); }
  Var add_const(Var a, double c) { return push(val(a) + c, a, -1, 1.0, 0.0); }
  Var mul_const(Var a, double c) { return push(val(a) * c, a, -1, c, 0.0); }
  Var square(Var a) { return push(val(a) * val(a), a, -1, 2.0 * val(a), 0.0); }
  Var exp(Var a) {
    double e = std::exp(val(a));
    return push(e, a, -1, e, 0.0);
  }
  Var log(Var a) { return push(std::log(val(a)), a, -1, 1.0 / val(a), 0.0); }
  Var tanh(Var a) {
    double t = std::tanh(val(a));
    return push(t, a, -1, 1.0 - t * t, 0.0);
  }
  Var sigmoid(Var a) {
    double s = 1.0 / (1.0 + std::exp(-val(a)));
    return push(s, a, -1, s * (1.0 - s), 0.0);
  }
  // log(1 + e^a), evaluated overflow-free
  Var softplus(Var a) {
    double v = val(a);
    double sp = v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    return push(sp, a, -1, 1.0 / (1.0 + std::exp(-v)), 0.0);
  }
  Var clamp(Var a, double lo, double hi) {
    double v = val(a);
    double c = v < lo ? lo : (v > hi ? hi : v);
    return push(c, a, -1, (v >= lo && v <= hi) ? 1.0 : 0.0, 0.0);
  }

  double value(Var v) const { return nodes_[v].val; }

  // Backward sweep from a scalar loss node.
  void backward(Var loss) {
    if (loss < 0 || static_cast<std::size_t>(loss) >= nodes_.size())
      throw ContractError("Tape::backward: loss is not a recorded scalar node");
    adj_.assign(nodes_.size(), 0.0);
    adj_[loss] = 1.0;
    for (std::int64_t i = loss; i >= 0; --i) {
      double a = adj_[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      if (n.a >= 0) adj_[n.a] += n.da * a;
      if (n.b >= 0) adj_[n.b] += n.db * a;
    }
  }

  double adjoint(Var v) const { return adj_[v]; }

  void clear() {
    nodes_.clear();
    adj_.clear();
  }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    double val, da, db;
    Var a, b;
  };

  double val(Var v) const { return nodes_[v].val; }

  Var push(double v, Var a, Var b, double da, double db) {
    nodes_.push_back({v, da, db, a, b});
    return static_cast<Var>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<double> adj_;
};

// Gradient of a recorded scalar loss with respect to the given parameter vars.
inline Vector grad(Tape& tape, Tape::Var loss, std::span<const Tape::Var> params) {
  tape.backward(loss);
  Vector g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) g[i] = tape.adjoint(params[i]);
  return g;
}

}  // namespace flowcheck
