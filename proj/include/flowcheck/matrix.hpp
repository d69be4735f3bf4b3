#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "flowcheck/errors.hpp"

namespace flowcheck {

using Vector = std::vector<double>;

// Dense row-major matrix. Small sizes only; no view machinery.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw ContractError("Matrix: negative dimension");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> row(int r) { return {v_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(int r) const {
    return {v_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  Vector row_vector(int r) const {
    auto s = row(r);
    return Vector(s.begin(), s.end());
  }
  Vector col_vector(int c) const {
    Vector out(rows_);
    for (int r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  Vector& data() { return v_; }
  const Vector& data() const { return v_; }

private:
  int rows_ = 0, cols_ = 0;
  Vector v_;
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw ContractError(std::string(what) + ": dimension mismatch, got " + std::to_string(got) +
                        ", expected " + std::to_string(want));
}

// In-place Cholesky factor (lower) of a symmetric positive definite matrix.
Matrix cholesky(const Matrix& a);

// Solve L y = b with L lower triangular.
Vector solve_lower(const Matrix& l, const Vector& b);
// Solve L^T y = b with L lower triangular.
Vector solve_lower_transposed(const Matrix& l, const Vector& b);
// Inverse of an SPD matrix via its Cholesky factor.
Matrix spd_inverse(const Matrix& a);
// Solve a general small SPD system A x = b.
Vector spd_solve(const Matrix& a, const Vector& b);

double det_small(const Matrix& a);  // direct expansion, n <= 3

}  // namespace flowcheck
