// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used only by tests. Each oracle
// recomputes a quantity along a different route than the library code so the
// two cannot share a bug.
#ifndef ATTNKIT_TESTS_ORACLES_HPP
#define ATTNKIT_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "attnkit/common.hpp"

namespace oracles {

using attnkit::ArrayD;
using attnkit::Rng;

/// NMI via the explicit joint probability table: p(q_i, k_j) = A[i, j] / N,
/// marginals by summation over the table, I and H from first principles.
inline double nmi_probability_table(const ArrayD& a) {
  const size_t n = a.dim(0);
  std::vector<std::vector<double>> joint(n, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) joint[i][j] = a.data[i * n + j] / static_cast<double>(n);
  std::vector<double> pq(n, 0.0), pk(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      pq[i] += joint[i][j];
      pk[j] += joint[i][j];
    }
  double info = 0.0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (joint[i][j] > 0.0) info += joint[i][j] * std::log(joint[i][j] / (pq[i] * pk[j]));
  double hq = 0.0, hk = 0.0;
  for (size_t i = 0; i < n; ++i)
    if (pq[i] > 0.0) hq -= pq[i] * std::log(pq[i]);
  for (size_t j = 0; j < n; ++j)
    if (pk[j] > 0.0) hk -= pk[j] * std::log(pk[j]);
  if (hq <= 0.0 || hk <= 0.0) return 0.0;
  double nmi = info / std::sqrt(hq * hk);
  return std::clamp(nmi, 0.0, 1.0);
}

/// Triple-loop KL with explicit 0*log0 handling and 1e-12 floors.
inline double kl_triple_loop(const std::vector<ArrayD>& teacher,
                             const std::vector<ArrayD>& student) {
  double total = 0.0;
  for (size_t m = 0; m < teacher.size(); ++m) {
    const size_t n = teacher[m].dim(0);
    double head = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (size_t j = 0; j < n; ++j) {
        double t = teacher[m].data[i * n + j];
        double s = student[m].data[i * n + j];
        if (t > 0.0) row += t * std::log(std::max(t, 1e-12) / std::max(s, 1e-12));
      }
      head += row;
    }
    total += head / static_cast<double>(n);
  }
  return total / static_cast<double>(teacher.size());
}

/// CKA via centered Gram matrices and HSIC, the kernel-space route.
inline double cka_gram_hsic(const ArrayD& x, const ArrayD& y) {
  const size_t n = x.dim(0);
  auto gram = [n](const ArrayD& f) {
    const size_t d = f.dim(1);
    std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        for (size_t c = 0; c < d; ++c) k[i][j] += f.data[i * d + c] * f.data[j * d + c];
    return k;
  };
  auto center = [n](std::vector<std::vector<double>> k) {
    std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        row_mean[i] += k[i][j];
        col_mean[j] += k[i][j];
        total += k[i][j];
      }
    for (size_t i = 0; i < n; ++i) row_mean[i] /= n;
    for (size_t j = 0; j < n; ++j) col_mean[j] /= n;
    total /= static_cast<double>(n) * n;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) k[i][j] += total - row_mean[i] - col_mean[j];
    return k;
  };
  auto hsic = [n](const std::vector<std::vector<double>>& a,
                  const std::vector<std::vector<double>>& b) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) s += a[i][j] * b[i][j];
    return s;
  };
  auto kc = center(gram(x));
  auto lc = center(gram(y));
  return hsic(kc, lc) / std::sqrt(hsic(kc, kc) * hsic(lc, lc));
}

/// Brute-force greedy dedup against every previously kept record.
inline std::vector<size_t> dedup_brute_force(const ArrayD& unit_vectors, double threshold) {
  const size_t n = unit_vectors.dim(0), d = unit_vectors.dim(1);
  std::vector<size_t> kept;
  for (size_t i = 0; i < n; ++i) {
    double max_sim = -2.0;
    for (size_t k : kept) {
      double dot = 0.0;
      for (size_t c = 0; c < d; ++c)
        dot += unit_vectors.data[i * d + c] * unit_vectors.data[k * d + c];
      max_sim = std::max(max_sim, dot);
    }
    if (kept.empty() || max_sim < threshold) kept.push_back(i);
  }
  return kept;
}

/// Central finite difference of a scalar closure at x, step h.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Relative-error gate used by every gradient check: pass when either the
/// absolute difference is negligible or the relative error is within tol.
inline bool grad_close(double analytic, double fd, double rel_tol, double abs_tol = 1e-7) {
  double diff = std::fabs(analytic - fd);
  if (diff <= abs_tol) return true;
  return diff / std::max(std::fabs(analytic), std::fabs(fd)) <= rel_tol;
}

/// Random row-stochastic matrix (softmax of gaussian logits, f64).
inline ArrayD random_stochastic(size_t n, Rng& rng, double sharpness = 2.0) {
  ArrayD a = ArrayD::zeros({n, n});
  for (size_t i = 0; i < n; ++i) {
    double mx = -1e300;
    std::vector<double> logits(n);
    for (size_t j = 0; j < n; ++j) {
      logits[j] = sharpness * rng.normal();
      mx = std::max(mx, logits[j]);
    }
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(logits[j] - mx);
    for (size_t j = 0; j < n; ++j) a.data[i * n + j] = std::exp(logits[j] - mx) / sum;
  }
  return a;
}

inline ArrayD random_matrix(size_t rows, size_t cols, Rng& rng) {
  ArrayD a = ArrayD::zeros({rows, cols});
  for (double& v : a.data) v = rng.normal();
  return a;
}

}  // namespace oracles

#endif  // ATTNKIT_TESTS_ORACLES_HPP
