#pragma once

#include <vector>

#include "flowcheck/errors.hpp"
#include "flowcheck/matrix.hpp"

namespace flowcheck {

// Strictly increasing alpha values inside (0,1), endpoints excluded.
struct AlphaGrid {
  Vector alphas;

  static AlphaGrid equispaced(int size) {
    if (size < 1) throw ContractError("AlphaGrid: size must be positive");
    AlphaGrid g;
    g.alphas.resize(size);
    for (int k = 0; k < size; ++k) g.alphas[k] = static_cast<double>(k + 1) / (size + 1);
    return g;
  }

  static AlphaGrid from_values(Vector values) {
    AlphaGrid g;
    g.alphas = std::move(values);
    g.validate();
    return g;
  }

  int size() const { return static_cast<int>(alphas.size()); }

  void validate() const {
    if (alphas.empty()) throw ContractError("AlphaGrid: empty grid");
    double prev = 0.0;
    for (double a : alphas) {
      if (!(a > prev && a < 1.0))
        throw ContractError("AlphaGrid: values must be strictly increasing inside (0,1)");
      prev = a;
    }
  }
};

}  // namespace flowcheck
