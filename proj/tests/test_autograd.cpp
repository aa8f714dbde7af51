// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "attnkit/autograd.hpp"
#include "oracles.hpp"

using namespace attnkit;

namespace {

// FD-checks the gradient of `build` w.r.t. one input array by rebuilding the
// graph at perturbed points.
void check_gradient(ArrayD base,
                    const std::function<double(const ArrayD&)>& eval,
                    const ArrayD& analytic, double h = 1e-6, double tol = 1e-6) {
  for (size_t i = 0; i < base.numel(); ++i) {
    double kept = base.data[i];
    base.data[i] = kept + h;
    double up = eval(base);
    base.data[i] = kept - h;
    double down = eval(base);
    base.data[i] = kept;
    double fd = (up - down) / (2.0 * h);
    CAPTURE(i);
    CHECK(oracles::grad_close(analytic.data[i], fd, tol));
  }
}

}  // namespace

TEST_CASE("loss = sum of a parameter gives an all-ones gradient") {
  Graph<double> g;
  ArrayD p({2, 3}, {1, 2, 3, 4, 5, 6});
  int pid = g.input(p, true);
  g.backward(g.sum_all(pid));
  ArrayD grad = g.grad(pid);
  for (double v : grad.data) CHECK(v == 1.0);
}

TEST_CASE("loss = ||p||^2 / 2 gives gradient p") {
  Graph<double> g;
  ArrayD p({4}, {0.5, -1.5, 2.0, 0.0});
  int pid = g.input(p, true);
  int loss = g.scale(g.sum_all(g.mul(pid, pid)), 0.5);
  g.backward(loss);
  ArrayD grad = g.grad(pid);
  for (size_t i = 0; i < 4; ++i) CHECK(grad.data[i] == doctest::Approx(p.data[i]));
}

TEST_CASE("matmul, linear, softmax, layernorm, gelu pass finite differences") {
  Rng rng(301);
  ArrayD x = oracles::random_matrix(3, 4, rng);
  ArrayD w = oracles::random_matrix(5, 4, rng);
  ArrayD b = oracles::random_matrix(1, 5, rng);
  b.shape = {5};
  ArrayD gamma = ArrayD::full({4}, 1.2);
  ArrayD beta = ArrayD::full({4}, -0.3);

  auto run = [&](const ArrayD& xv, const ArrayD& wv, const ArrayD& bv, const ArrayD& gv,
                 const ArrayD& bev) -> double {
    Graph<double> g;
    int xi = g.input(xv, true);
    int wi = g.input(wv, true);
    int bi = g.input(bv, true);
    int gi = g.input(gv, true);
    int bei = g.input(bev, true);
    int normed = g.layernorm(xi, gi, bei);
    int lin = g.linear(normed, wi, bi);
    int act = g.gelu(lin);
    int soft = g.softmax_rows(act);
    int prod = g.matmul_t(soft, soft);
    return g.value(g.sum_all(g.mul(prod, prod))).data[0];
  };

  Graph<double> g;
  int xi = g.input(x, true);
  int wi = g.input(w, true);
  int bi = g.input(b, true);
  int gi = g.input(gamma, true);
  int bei = g.input(beta, true);
  int normed = g.layernorm(xi, gi, bei);
  int lin = g.linear(normed, wi, bi);
  int act = g.gelu(lin);
  int soft = g.softmax_rows(act);
  int prod = g.matmul_t(soft, soft);
  g.backward(g.sum_all(g.mul(prod, prod)));

  check_gradient(x, [&](const ArrayD& v) { return run(v, w, b, gamma, beta); }, g.grad(xi));
  check_gradient(w, [&](const ArrayD& v) { return run(x, v, b, gamma, beta); }, g.grad(wi));
  check_gradient(b, [&](const ArrayD& v) { return run(x, w, v, gamma, beta); }, g.grad(bi));
  check_gradient(gamma, [&](const ArrayD& v) { return run(x, w, b, v, beta); }, g.grad(gi));
  check_gradient(beta, [&](const ArrayD& v) { return run(x, w, b, gamma, v); }, g.grad(bei));
}

TEST_CASE("slice and concat are exact inverses in the gradient") {
  Rng rng(303);
  ArrayD x = oracles::random_matrix(4, 6, rng);
  Graph<double> g;
  int xi = g.input(x, true);
  std::vector<int> parts;
  for (size_t c = 0; c < 6; c += 2) parts.push_back(g.slice_cols(xi, c, c + 2));
  int merged = g.concat_cols(parts);
  CHECK(g.value(merged).data == x.data);
  g.backward(g.sum_all(g.mul(merged, merged)));
  ArrayD grad = g.grad(xi);
  for (size_t i = 0; i < x.numel(); ++i)
    CHECK(grad.data[i] == doctest::Approx(2.0 * x.data[i]));
}

TEST_CASE("kl_vs_target_rows value and gradient") {
  Rng rng(307);
  ArrayD target = oracles::random_stochastic(4, rng);
  ArrayD logits = oracles::random_matrix(4, 4, rng);

  auto eval = [&](const ArrayD& lg) {
    Graph<double> g;
    int li = g.input(lg, true);
    int ti = g.constant(target);
    return g.value(g.kl_vs_target_rows(li, ti)).data[0];
  };

  SUBCASE("zero when student softmax equals the target") {
    ArrayD log_target = target;
    for (double& v : log_target.data) v = std::log(v);
    CHECK(eval(log_target) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("teacher row [1,0] vs student [0.5,0.5] is ln 2") {
    ArrayD t({1, 2}, {1.0, 0.0});
    ArrayD lg({1, 2}, {0.0, 0.0});
    Graph<double> g;
    CHECK(g.value(g.kl_vs_target_rows(g.input(lg, true), g.constant(t))).data[0] ==
          doctest::Approx(0.6931471805599453).epsilon(1e-12));
  }
  SUBCASE("value matches the triple-loop oracle on softmaxed logits") {
    Graph<double> g;
    int li = g.input(logits, true);
    double kl = g.value(g.kl_vs_target_rows(li, g.constant(target))).data[0];
    ArrayD student = g.value(g.softmax_rows(li));
    CHECK(kl == doctest::Approx(oracles::kl_triple_loop({target}, {student})).epsilon(1e-9));
  }
  SUBCASE("gradient w.r.t. logits passes central differences") {
    Graph<double> g;
    int li = g.input(logits, true);
    g.backward(g.kl_vs_target_rows(li, g.constant(target)));
    check_gradient(logits, eval, g.grad(li), 1e-5, 1e-4);
  }
}

TEST_CASE("cosine_distance_rows value and gradient") {
  Rng rng(311);
  ArrayD target = oracles::random_matrix(3, 5, rng);
  ArrayD feat = oracles::random_matrix(3, 5, rng);

  auto eval = [&](const ArrayD& f) {
    Graph<double> g;
    return g.value(g.cosine_distance_rows(g.input(f, true), g.constant(target))).data[0];
  };

  SUBCASE("zero for identical features") {
    CHECK(eval(target) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("one for orthogonal rows") {
    ArrayD t({1, 2}, {1.0, 0.0});
    ArrayD f({1, 2}, {0.0, 2.0});
    Graph<double> g;
    CHECK(g.value(g.cosine_distance_rows(g.input(f, true), g.constant(t))).data[0] ==
          doctest::Approx(1.0));
  }
  SUBCASE("gradient passes central differences") {
    Graph<double> g;
    int fi = g.input(feat, true);
    g.backward(g.cosine_distance_rows(fi, g.constant(target)));
    check_gradient(feat, eval, g.grad(fi), 1e-6, 1e-5);
  }
  SUBCASE("zero-norm row is an error") {
    ArrayD f = ArrayD::zeros({3, 5});
    Graph<double> g;
    CHECK_THROWS_AS(g.cosine_distance_rows(g.input(f, true), g.constant(target)),
                    NumericError);
  }
}

TEST_CASE("softmax_xent_rows gradient passes central differences") {
  Rng rng(313);
  ArrayD logits = oracles::random_matrix(5, 3, rng);
  std::vector<size_t> labels = {0, 2, 1, 1, 0};
  auto eval = [&](const ArrayD& lg) {
    Graph<double> g;
    return g.value(g.softmax_xent_rows(g.input(lg, true), labels)).data[0];
  };
  Graph<double> g;
  int li = g.input(logits, true);
  g.backward(g.softmax_xent_rows(li, labels));
  check_gradient(logits, eval, g.grad(li), 1e-5, 1e-4);
}

TEST_CASE("backward rejects non-scalar and non-finite roots") {
  Graph<double> g;
  int a = g.input(ArrayD({2}, {1.0, 2.0}), true);
  CHECK_THROWS_AS(g.backward(a), NumericError);
  int inf = g.input(ArrayD({1}, {std::numeric_limits<double>::infinity()}), true);
  CHECK_THROWS_AS(g.backward(inf), NumericError);
}
