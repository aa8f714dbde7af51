// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_COMMON_HPP
#define ATTNKIT_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnkit {

/// Malformed or inconsistent on-disk data (bad magic, truncated stream,
/// header/payload mismatch). CLI maps this to exit code 3.
class CodecError : public std::runtime_error {
public:
  explicit CodecError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Degenerate numeric input or divergence (non-stochastic rows, zero
/// variance, NaN loss). CLI maps this to exit code 4.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

/// Dense row-major array of T. The workhorse container for all math paths;
/// the dtype-tagged io container lives in tensor.hpp.
template <typename T>
struct Array {
  std::vector<size_t> shape;
  std::vector<T> data;

  Array() = default;
  Array(std::vector<size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
      throw NumericError("Array: shape/data size mismatch");
  }

  static Array zeros(std::vector<size_t> s) {
    size_t n = shape_numel(s);
    return Array{std::move(s), std::vector<T>(n, T(0))};
  }
  static Array full(std::vector<size_t> s, T v) {
    size_t n = shape_numel(s);
    return Array{std::move(s), std::vector<T>(n, v)};
  }

  size_t numel() const { return data.size(); }
  size_t dim(size_t i) const { return shape.at(i); }
  size_t rank() const { return shape.size(); }

  T& at(size_t i) { return data[i]; }
  const T& at(size_t i) const { return data[i]; }
};

using ArrayF = Array<float>;
using ArrayD = Array<double>;

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

/// splitmix64; used to seed and to drive the toolkit PRNG. The generator is
/// pinned here (not std::mt19937 distributions) so seeded fixtures produce
/// identical streams on every platform.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    state += 0x9E3779B97F4A7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// uniform integer in [0, n)
  uint64_t below(uint64_t n) { return next_u64() % n; }

  /// standard normal via Box-Muller
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// truncated normal: resample until |z| <= 2, then scale
  double trunc_normal(double sigma) {
    double z = normal();
    while (std::fabs(z) > 2.0) z = normal();
    return z * sigma;
  }
};

}  // namespace attnkit

#endif  // ATTNKIT_COMMON_HPP
