// SPDX-License-Identifier: Apache-2.0
#include "attnkit/cka.hpp"

#include <cmath>

namespace attnkit {

namespace {

// Column-centered copy of an n x d feature matrix.
ArrayD center_columns(const ArrayD& x) {
  const size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> mean(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) mean[j] += x.data[i * d + j];
  for (double& m : mean) m /= static_cast<double>(n);
  ArrayD out = ArrayD::zeros({n, d});
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) out.data[i * d + j] = x.data[i * d + j] - mean[j];
  return out;
}

// ||A^T B||_F^2 for column-centered A (n x da) and B (n x db), computed as
// sum over (p, q) of (column_p(A) . column_q(B))^2 without materializing the
// n x n Gram matrices.
double cross_frob_sq(const ArrayD& a, const ArrayD& b) {
  const size_t n = a.dim(0), da = a.dim(1), db = b.dim(1);
  double total = 0.0;
  for (size_t p = 0; p < da; ++p)
    for (size_t q = 0; q < db; ++q) {
      double dot = 0.0;
      for (size_t i = 0; i < n; ++i) dot += a.data[i * da + p] * b.data[i * db + q];
      total += dot * dot;
    }
  return total;
}

}  // namespace

CkaResult linear_cka(const ArrayD& x, const ArrayD& y) {
  if (x.rank() != 2 || y.rank() != 2) throw NumericError("linear_cka: inputs must be matrices");
  const size_t n = x.dim(0);
  if (y.dim(0) != n) throw NumericError("linear_cka: example counts differ");
  if (n < 3) throw NumericError("linear_cka requires at least 3 examples");
  if (!all_finite(x.data) || !all_finite(y.data))
    throw NumericError("linear_cka: non-finite input");

  ArrayD xc = center_columns(x);
  ArrayD yc = center_columns(y);

  double xx = cross_frob_sq(xc, xc);
  double yy = cross_frob_sq(yc, yc);
  if (xx <= 0.0 || yy <= 0.0)
    throw NumericError("linear_cka: zero-variance input (degenerate)");

  double xy = cross_frob_sq(yc, xc);
  CkaResult r;
  r.value = xy / (std::sqrt(xx) * std::sqrt(yy));
  r.n_examples = n;
  r.dim_a = x.dim(1);
  r.dim_b = y.dim(1);
  return r;
}

ArrayD cka_grid(const std::vector<ArrayD>& layers_a, const std::vector<ArrayD>& layers_b) {
  ArrayD grid = ArrayD::zeros({layers_a.size(), layers_b.size()});
  for (size_t i = 0; i < layers_a.size(); ++i)
    for (size_t j = 0; j < layers_b.size(); ++j)
      grid.data[i * layers_b.size() + j] = linear_cka(layers_a[i], layers_b[j]).value;
  return grid;
}

}  // namespace attnkit
