#include <doctest.h>

#include <cmath>

#include "accsurf/autodiff.hpp"
#include "accsurf/special.hpp"
#include "test_util.hpp"

using namespace accsurf;
using ad::Mat;
using ad::Var;
using testutil::fd_gradient;
using testutil::grads_close;
using testutil::random_mat;

namespace {

// Builds a scalar loss from a single parameter leaf and compares the reverse
// gradient against central finite differences.
void check_gradient(const std::function<Var(const Var&)>& body, Mat x0,
                    double tol = 1e-4, double h = 1e-5) {
  ad::ParamStore store;
  ad::Param& p = store.add("x", x0);
  auto loss_value = [&]() {
    return ad::total_sum(body(ad::leaf(p))).scalar();
  };
  Mat fd = fd_gradient(loss_value, p.value, h);
  p.grad.setZero();
  ad::backward(ad::total_sum(body(ad::leaf(p))));
  CAPTURE(p.grad);
  CAPTURE(fd);
  CHECK(grads_close(p.grad, fd, tol));
}

}  // namespace

TEST_CASE("square gradient at x=3 is 6") {
  ad::ParamStore store;
  ad::Param& p = store.add("x", Mat::Constant(1, 1, 3.0));
  Var y = ad::square(ad::leaf(p));
  double v = ad::backward(y);
  CHECK(v == doctest::Approx(9.0));
  CHECK(p.grad(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("lgamma gradient at 1 equals digamma(1)") {
  // Euler-Mascheroni, negated; frozen from the finite-difference oracle.
  const double expected = -0.5772156649015329;
  ad::ParamStore store;
  ad::Param& p = store.add("x", Mat::Constant(1, 1, 1.0));
  ad::backward(ad::lgamma_(ad::leaf(p)));
  CHECK(p.grad(0, 0) == doctest::Approx(expected).epsilon(1e-9));

  Mat x = Mat::Constant(1, 1, 1.0);
  auto f = [&]() { return std::lgamma(x(0, 0)); };
  Mat fd = fd_gradient(f, x, 1e-5);
  CHECK(p.grad(0, 0) == doctest::Approx(fd(0, 0)).epsilon(1e-6));
}

TEST_CASE("softplus*sigmoid gradients at the origin") {
  ad::ParamStore store;
  ad::Param& px = store.add("x", Mat::Zero(1, 1));
  ad::Param& py = store.add("y", Mat::Zero(1, 1));
  Var f = ad::mul(ad::softplus_(ad::leaf(px)), ad::sigmoid_(ad::leaf(py)));
  ad::backward(f);
  // d/dx = sigmoid(0) * sigmoid(0) = 0.25
  CHECK(px.grad(0, 0) == doctest::Approx(0.25));
  // d/dy = softplus(0) * sigmoid'(0) = log(2) * 0.25
  CHECK(py.grad(0, 0) == doctest::Approx(std::log(2.0) * 0.25));

  auto fval = [&]() {
    return softplus(px.value(0, 0)) * sigmoid(py.value(0, 0));
  };
  CHECK(px.grad(0, 0) ==
        doctest::Approx(fd_gradient(fval, px.value)(0, 0)).epsilon(1e-8));
  CHECK(py.grad(0, 0) ==
        doctest::Approx(fd_gradient(fval, py.value)(0, 0)).epsilon(1e-8));
}

TEST_CASE("elementwise and reduction primitives match finite differences") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    Mat x = random_mat(rng, 3, 4, 0.3, 2.5);  // positive, away from poles
    check_gradient([](const Var& v) { return ad::exp_(v); }, x);
    check_gradient([](const Var& v) { return ad::log_(v); }, x);
    check_gradient([](const Var& v) { return ad::sqrt_(v); }, x);
    check_gradient([](const Var& v) { return ad::square(v); }, x);
    check_gradient([](const Var& v) { return ad::sigmoid_(v); }, x);
    check_gradient([](const Var& v) { return ad::softplus_(v); }, x);
    check_gradient([](const Var& v) { return ad::tanh_(v); }, x);
    check_gradient([](const Var& v) { return ad::lgamma_(v); }, x);
    check_gradient([](const Var& v) { return ad::neg(v); }, x);
    check_gradient([](const Var& v) { return ad::scale(v, -1.7); }, x);
    check_gradient([](const Var& v) { return ad::add_const(v, 0.3); }, x);
    check_gradient([](const Var& v) { return ad::clamp(v, 0.0, 10.0); }, x);
    check_gradient([](const Var& v) { return ad::row_sum(ad::exp_(v)); }, x);
    check_gradient([](const Var& v) { return ad::col_sum(ad::exp_(v)); }, x);
    check_gradient([](const Var& v) { return ad::logsumexp_rows(v); }, x);
  }
}

TEST_CASE("binary primitives match finite differences") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Mat a0 = random_mat(rng, 3, 3, 0.5, 2.0);
    Mat b0 = random_mat(rng, 3, 3, 0.5, 2.0);
    ad::ParamStore store;
    ad::Param& a = store.add("a", a0);
    ad::Param& b = store.add("b", b0);
    auto build = [&](auto op) {
      return ad::total_sum(op(ad::leaf(a), ad::leaf(b)));
    };
    auto check_pair = [&](auto op) {
      auto f = [&]() { return build(op).scalar(); };
      Mat fda = fd_gradient(f, a.value);
      Mat fdb = fd_gradient(f, b.value);
      a.grad.setZero();
      b.grad.setZero();
      ad::backward(build(op));
      CHECK(grads_close(a.grad, fda));
      CHECK(grads_close(b.grad, fdb));
    };
    check_pair([](const Var& x, const Var& y) { return ad::add(x, y); });
    check_pair([](const Var& x, const Var& y) { return ad::sub(x, y); });
    check_pair([](const Var& x, const Var& y) { return ad::mul(x, y); });
    check_pair([](const Var& x, const Var& y) { return ad::div(x, y); });
    check_pair([](const Var& x, const Var& y) { return ad::matmul(x, y); });
    check_pair([](const Var& x, const Var& y) {
      return ad::matmul(ad::transpose(x), y);
    });
  }
}

TEST_CASE("broadcast, diag, and scalar-product primitives") {
  Rng rng(13);
  Mat v0 = random_mat(rng, 4, 1, 0.5, 1.5);
  check_gradient([](const Var& v) { return ad::rep_cols(v, 3); }, v0);
  check_gradient([](const Var& v) { return ad::make_diag(v); }, v0);
  Mat r0 = random_mat(rng, 1, 4, 0.5, 1.5);
  check_gradient([](const Var& v) { return ad::rep_rows(v, 3); }, r0);
  Mat m0 = random_mat(rng, 4, 4, 0.5, 1.5);
  check_gradient([](const Var& v) { return ad::take_diag(v); }, m0);

  ad::ParamStore store;
  ad::Param& x = store.add("x", random_mat(rng, 3, 2, 0.5, 1.5));
  ad::Param& s = store.add("s", Mat::Constant(1, 1, 1.7));
  auto build = [&](bool divide) {
    Var m = divide ? ad::div_scalar(ad::leaf(x), ad::leaf(s))
                   : ad::mul_scalar(ad::leaf(x), ad::leaf(s));
    return ad::total_sum(ad::square(m));
  };
  for (bool divide : {false, true}) {
    auto f = [&]() { return build(divide).scalar(); };
    Mat fdx = fd_gradient(f, x.value);
    Mat fds = fd_gradient(f, s.value);
    x.grad.setZero();
    s.grad.setZero();
    ad::backward(build(divide));
    CHECK(grads_close(x.grad, fdx));
    CHECK(grads_close(s.grad, fds));
  }
}

TEST_CASE("SPD solve, logdet, and triangular solve adjoints") {
  Rng rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    // K = M M^T + I keeps K SPD while the gradient flows through M.
    Mat m0 = random_mat(rng, 3, 3);
    Mat b0 = random_mat(rng, 3, 2);
    ad::ParamStore store;
    ad::Param& m = store.add("m", m0);
    ad::Param& b = store.add("b", b0);
    auto spd = [&](const Var& mv) {
      return ad::add(ad::matmul(mv, ad::transpose(mv)),
                     ad::constant(Mat(Mat::Identity(3, 3))));
    };
    auto build = [&](int which) {
      Var k = spd(ad::leaf(m));
      if (which == 0) {
        return ad::total_sum(ad::square(ad::spd_solve(k, ad::leaf(b))));
      }
      if (which == 1) return ad::logdet_spd(k);
      // Lower-triangular solve through a masked factor.
      Mat mask = Mat::Ones(3, 3);
      mask.triangularView<Eigen::StrictlyUpper>().setZero();
      Var l = ad::add(ad::mul(ad::leaf(m), ad::constant(mask)),
                      ad::constant(Mat(Mat::Identity(3, 3))));
      return ad::total_sum(ad::square(ad::tri_solve_lower(l, ad::leaf(b))));
    };
    for (int which : {0, 1, 2}) {
      auto f = [&]() { return build(which).scalar(); };
      Mat fdm = fd_gradient(f, m.value);
      Mat fdb = fd_gradient(f, b.value);
      m.grad.setZero();
      b.grad.setZero();
      ad::backward(build(which));
      CHECK(grads_close(m.grad, fdm));
      if (which != 1) CHECK(grads_close(b.grad, fdb));
    }
  }
}

TEST_CASE("backward is deterministic and rejects non-scalar roots") {
  Rng rng(23);
  ad::ParamStore store;
  ad::Param& p = store.add("x", random_mat(rng, 2, 2, 0.5, 1.5));
  auto build = [&]() {
    return ad::total_sum(ad::mul(ad::exp_(ad::leaf(p)), ad::leaf(p)));
  };
  ad::backward(build());
  Mat g1 = p.grad;
  p.grad.setZero();
  ad::backward(build());
  CHECK(g1 == p.grad);

  CHECK_THROWS_AS(ad::backward(ad::leaf(p)), std::invalid_argument);
}

TEST_CASE("leaves not reachable from the root get zero gradient") {
  ad::ParamStore store;
  ad::Param& used = store.add("used", Mat::Constant(1, 1, 2.0));
  ad::Param& unused = store.add("unused", Mat::Constant(1, 1, 5.0));
  ad::backward(ad::square(ad::leaf(used)));
  CHECK(used.grad(0, 0) == doctest::Approx(4.0));
  CHECK(unused.grad(0, 0) == 0.0);
}

TEST_CASE("Adam single step from zero moments") {
  // Bias-corrected first step: delta = -lr * g / (|g| + eps).
  ad::ParamStore store;
  ad::Param& p = store.add("x", Mat::Constant(1, 1, 1.0));
  ad::Adam opt(ad::AdamConfig{.lr = 0.1});
  p.grad = Mat::Constant(1, 1, 3.0);
  auto params = store.all();
  opt.step(params);
  const double expected = 1.0 - 0.1 * 3.0 / (3.0 + 1e-8);
  CHECK(p.value(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("Adam descends against a constant gradient and holds at zero") {
  ad::ParamStore store;
  ad::Param& p = store.add("x", Mat::Zero(1, 1));
  ad::Adam opt;
  auto params = store.all();
  for (int i = 0; i < 50; ++i) {
    p.grad = Mat::Constant(1, 1, -2.0);
    opt.step(params);
  }
  CHECK(p.value(0, 0) > 0.0);  // moves opposite to gradient sign

  ad::Param& q = store.add("y", Mat::Constant(1, 1, 0.7));
  std::vector<ad::Param*> only_q = {&q};
  q.grad = Mat::Zero(1, 1);
  opt.step(only_q);
  CHECK(q.value(0, 0) == doctest::Approx(0.7));
}

TEST_CASE("Adam aborts on non-finite gradients") {
  ad::ParamStore store;
  ad::Param& p = store.add("x", Mat::Zero(1, 1));
  p.grad = Mat::Constant(1, 1, std::nan(""));
  ad::Adam opt;
  auto params = store.all();
  CHECK_THROWS_AS(opt.step(params), ad::NumericalError);
}

TEST_CASE("digamma reference values") {
  // psi(1) = -gamma, psi(0.5) = -gamma - 2 log 2, psi(2) = 1 - gamma.
  const double gamma = 0.5772156649015329;
  CHECK(digamma(1.0) == doctest::Approx(-gamma).epsilon(1e-12));
  CHECK(digamma(0.5) ==
        doctest::Approx(-gamma - 2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(digamma(2.0) == doctest::Approx(1.0 - gamma).epsilon(1e-12));
  CHECK(digamma(10.5) == doctest::Approx(2.3030010342976865).epsilon(1e-12));
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
}
