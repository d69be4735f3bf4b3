#include "flowcheck/matrix.hpp"

#include <cmath>

namespace flowcheck {

Matrix cholesky(const Matrix& a) {
  const int n = a.rows();
  if (a.cols() != n) throw ContractError("cholesky: matrix not square");
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

Vector solve_lower(const Matrix& l, const Vector& b) {
  const int n = l.rows();
  require_dim(b.size(), n, "solve_lower");
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

Vector solve_lower_transposed(const Matrix& l, const Vector& b) {
  const int n = l.rows();
  require_dim(b.size(), n, "solve_lower_transposed");
  Vector y(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

Vector spd_solve(const Matrix& a, const Vector& b) {
  Matrix l = cholesky(a);
  return solve_lower_transposed(l, solve_lower(l, b));
}

Matrix spd_inverse(const Matrix& a) {
  const int n = a.rows();
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    Vector e(n, 0.0);
    e[j] = 1.0;
    Vector col = spd_solve(a, e);
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

double det_small(const Matrix& a) {
  const int n = a.rows();
  if (a.cols() != n || n > 3) throw ContractError("det_small: supports n <= 3 only");
  if (n == 0) return 1.0;
  if (n == 1) return a(0, 0);
  if (n == 2) return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

}  // namespace flowcheck
