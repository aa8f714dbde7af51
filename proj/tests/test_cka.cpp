// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "attnkit/cka.hpp"
#include "oracles.hpp"

using namespace attnkit;

TEST_CASE("cka self-similarity is 1") {
  Rng rng(201);
  for (int rep = 0; rep < 10; ++rep) {
    ArrayD x = oracles::random_matrix(8, 4, rng);
    CHECK(linear_cka(x, x).value == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cka is invariant to orthogonal transforms") {
  Rng rng(203);
  ArrayD x = oracles::random_matrix(10, 4, rng);
  // 4x4 rotation built from Givens rotations
  double angles[2] = {0.7, -1.2};
  ArrayD y = x;
  for (int g = 0; g < 2; ++g) {
    size_t a = g, b = g + 2;
    double c = std::cos(angles[g]), s = std::sin(angles[g]);
    for (size_t i = 0; i < 10; ++i) {
      double va = y.data[i * 4 + a], vb = y.data[i * 4 + b];
      y.data[i * 4 + a] = c * va - s * vb;
      y.data[i * 4 + b] = s * va + c * vb;
    }
  }
  CHECK(linear_cka(x, y).value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cka is symmetric and scale invariant") {
  Rng rng(207);
  for (int rep = 0; rep < 20; ++rep) {
    ArrayD x = oracles::random_matrix(9, 3, rng);
    ArrayD y = oracles::random_matrix(9, 5, rng);
    double xy = linear_cka(x, y).value;
    CHECK(linear_cka(y, x).value == doctest::Approx(xy).epsilon(1e-12));
    ArrayD xs = x, ys = y;
    for (double& v : xs.data) v *= 3.7;
    for (double& v : ys.data) v *= -0.2;
    CHECK(linear_cka(xs, ys).value == doctest::Approx(xy).epsilon(1e-9));
  }
}

TEST_CASE("cka feature form equals the Gram/HSIC oracle") {
  Rng rng(211);
  for (int rep = 0; rep < 50; ++rep) {
    size_t n = 5 + rng.below(10);
    ArrayD x = oracles::random_matrix(n, 2 + rng.below(5), rng);
    ArrayD y = oracles::random_matrix(n, 2 + rng.below(5), rng);
    CkaResult r = linear_cka(x, y);
    CHECK(r.value == doctest::Approx(oracles::cka_gram_hsic(x, y)).epsilon(1e-9));
    CHECK(r.value >= -1e-9);
    CHECK(r.value <= 1.0 + 1e-9);
    CHECK(r.n_examples == n);
  }
}

TEST_CASE("cka rejects degenerate input") {
  ArrayD x = ArrayD::zeros({5, 3});           // zero variance
  Rng rng(213);
  ArrayD y = oracles::random_matrix(5, 3, rng);
  CHECK_THROWS_AS(linear_cka(x, y), NumericError);
  ArrayD constant = ArrayD::full({5, 3}, 2.5);  // centered away to zero
  CHECK_THROWS_AS(linear_cka(constant, y), NumericError);
  ArrayD too_small = oracles::random_matrix(2, 3, rng);
  CHECK_THROWS_AS(linear_cka(too_small, too_small), NumericError);
}

TEST_CASE("cka_grid fills all layer pairs") {
  Rng rng(217);
  std::vector<ArrayD> a = {oracles::random_matrix(6, 3, rng), oracles::random_matrix(6, 4, rng)};
  std::vector<ArrayD> b = {oracles::random_matrix(6, 2, rng)};
  ArrayD grid = cka_grid(a, b);
  CHECK(grid.shape == std::vector<size_t>{2, 1});
  CHECK(grid.data[0] == doctest::Approx(linear_cka(a[0], b[0]).value));
}
