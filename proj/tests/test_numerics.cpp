#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "flowcheck/matrix.hpp"
#include "flowcheck/mlp.hpp"
#include "flowcheck/normal.hpp"
#include "flowcheck/rng.hpp"
#include "flowcheck/tape.hpp"
#include "support/oracles.hpp"

using namespace flowcheck;

TEST_CASE("normal_cdf trivial and oracle values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));

  // series-oracle value at the 97.5% point
  const double ref = oracles::normal_cdf_series(1.959964);
  CHECK(std::fabs(ref - 0.975) < 1e-6);
  CHECK(std::fabs(normal_cdf(1.959964) - 0.975) < 1e-6);
  CHECK(std::fabs(normal_cdf(1.959964) - ref) < 1e-12);

  // deep tail bounded by the asymptotic envelope phi(8)/8 * [1 - 1/64, 1]
  const double tail = normal_cdf(-8.0);
  CHECK(tail > 0.0);
  CHECK(tail < 1e-14);
  const double envelope = oracles::normal_pdf_ref(8.0) / 8.0;
  CHECK(tail < envelope);
  CHECK(tail > envelope * (1.0 - 1.0 / 64.0));
}

TEST_CASE("normal_cdf matches the series oracle across the bulk") {
  for (double v = -3.5; v <= 3.5; v += 0.05)
    CHECK(std::fabs(normal_cdf(v) - oracles::normal_cdf_series(v)) < 1e-12);
}

TEST_CASE("normal_cdf symmetry and monotonicity") {
  RngStream rng(11);
  double prev_in = -HUGE_VAL, prev_out = 0.0;
  std::vector<double> vs;
  for (int i = 0; i < 1000; ++i) vs.push_back(8.0 * (rng.u01() - 0.5) * 2.0);
  std::sort(vs.begin(), vs.end());
  for (double v : vs) {
    CHECK(std::fabs(normal_cdf(v) + normal_cdf(-v) - 1.0) < 1e-12);
    if (prev_in != -HUGE_VAL) CHECK(normal_cdf(v) >= prev_out);
    prev_in = v;
    prev_out = normal_cdf(v);
  }
}

TEST_CASE("normal_cdf rejects non-finite input") {
  CHECK_THROWS_AS(normal_cdf(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(normal_cdf(HUGE_VAL), std::invalid_argument);
}

TEST_CASE("normal_quantile trivial, bisection oracle, round trip") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));

  const double bis = oracles::bisect([](double v) { return oracles::normal_cdf_series(v); },
                                     0.975, -10.0, 10.0);
  CHECK(std::fabs(bis - 1.959964) < 1e-5);
  CHECK(std::fabs(normal_quantile(0.975) - 1.959964) < 1e-5);
  CHECK(std::fabs(normal_quantile(0.975) - bis) < 1e-9);

  RngStream rng(12);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.u01();
    worst = std::max(worst, std::fabs(normal_cdf(normal_quantile(u)) - u));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("normal_quantile domain errors") {
  CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(normal_quantile(-0.25), std::domain_error);
  CHECK_THROWS_AS(normal_quantile(1.25), std::domain_error);
}

TEST_CASE("rng streams replay bitwise and separate by id") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double ua = a.u01();
    all_equal = all_equal && (ua == b.u01());
    any_diff = any_diff || (ua != c.u01());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  RngStream d(42, 7);
  for (int i = 0; i < 1000; ++i) {
    const double u = d.u01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  RngStream e(1, 0);
  for (int i = 0; i < 200; ++i) CHECK(e.below(13) < 13);
}

TEST_CASE("rng normal draws have unit scale") {
  RngStream rng(5, 0);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::fabs(s / n) < 0.03);
  CHECK(std::fabs(s2 / n - 1.0) < 0.04);
}

TEST_CASE("tape gradients: polynomial and logistic identities") {
  {
    Tape t;
    Tape::Var p = t.input(3.0);
    Tape::Var loss = t.square(p);
    t.backward(loss);
    CHECK(t.adjoint(p) == doctest::Approx(6.0).epsilon(1e-14));
  }
  {
    Tape t;
    Tape::Var p = t.input(0.0);
    Tape::Var loss = t.log(t.sigmoid(p));
    t.backward(loss);
    CHECK(t.adjoint(p) == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("tape rejects an invalid loss node") {
  Tape t;
  t.input(1.0);
  CHECK_THROWS_AS(t.backward(-1), ContractError);
  CHECK_THROWS_AS(t.backward(99), ContractError);
}

namespace {

// scalar loss through an MLP: sum of squared outputs plus a tanh coupling
double mlp_loss(const Mlp& net, std::span<const double> params, std::span<const double> in) {
  std::vector<double> out(net.out_dim);
  net.eval(params, in, out);
  double s = 0.0;
  for (double o : out) s += o * o;
  return s + std::tanh(out[0]);
}

void check_mlp_gradient(const Mlp& net, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> params(net.n_params());
  for (double& p : params) p = 0.5 * rng.normal();
  std::vector<double> in(net.in_dim);
  for (double& v : in) v = rng.normal();

  Tape t;
  std::vector<Tape::Var> pv(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) pv[i] = t.input(params[i]);
  std::vector<Tape::Var> iv(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) iv[i] = t.constant(in[i]);
  std::vector<Tape::Var> ov(net.out_dim);
  net.eval_tape(t, pv, iv, ov);
  Tape::Var loss = t.tanh(ov[0]);
  for (Tape::Var o : ov) loss = t.add(loss, t.square(o));
  Vector g = grad(t, loss, pv);

  std::vector<double> fd = oracles::central_diff(
      [&](std::span<const double> p) { return mlp_loss(net, p, in); }, params);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double scale = std::max({std::fabs(g[i]), std::fabs(fd[i]), 1e-6});
    CHECK(std::fabs(g[i] - fd[i]) / scale < 1e-4);
  }
}

}  // namespace

TEST_CASE("tape gradient matches central differences on random networks") {
  check_mlp_gradient(Mlp(3, 8, 2), 100);
  check_mlp_gradient(Mlp(5, 4, 1), 101);
  check_mlp_gradient(Mlp(2, 0, 2), 102);  // affine degenerate
}

TEST_CASE("cholesky and solves on a small SPD system") {
  Matrix a(2, 2);
  a(0, 0) = 4.0;
  a(0, 1) = a(1, 0) = 1.0;
  a(1, 1) = 3.0;
  Matrix l = cholesky(a);
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(0.5));
  CHECK(l(0, 1) == doctest::Approx(0.0));

  Matrix inv = spd_inverse(a);
  // a * inv == identity
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 2; ++k) s += a(i, k) * inv(k, j);
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  CHECK(det_small(a) == doctest::Approx(11.0));
  Matrix bad(2, 2);
  bad(0, 0) = 1.0;
  bad(1, 1) = -1.0;
  CHECK_THROWS(cholesky(bad));
}

TEST_CASE("finiteness helpers") {
  Vector v{1.0, 2.0};
  CHECK(all_finite(v));
  v.push_back(std::nan(""));
  CHECK(!all_finite(v));
  CHECK_THROWS_AS(require_finite(v, "v"), std::invalid_argument);
}
