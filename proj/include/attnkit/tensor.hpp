// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_TENSOR_HPP
#define ATTNKIT_TENSOR_HPP

#include <string>
#include <variant>
#include <vector>

#include "attnkit/common.hpp"

namespace attnkit {

enum class Dtype { f32, f64 };

std::string dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);

/// Dtype-tagged row-major tensor shared by every codec. Analysis paths carry
/// f64 so reference values stay stable; training paths carry f32.
class Tensor {
public:
  Tensor() : shape_{0}, data_(std::vector<double>{}) {}
  Tensor(std::vector<size_t> shape, std::vector<double> data);
  Tensor(std::vector<size_t> shape, std::vector<float> data);

  static Tensor zeros(std::vector<size_t> shape, Dtype dtype);

  const std::vector<size_t>& shape() const { return shape_; }
  Dtype dtype() const {
    return std::holds_alternative<std::vector<double>>(data_) ? Dtype::f64 : Dtype::f32;
  }
  size_t numel() const { return shape_numel(shape_); }
  size_t element_width() const { return dtype() == Dtype::f64 ? 8 : 4; }

  const std::vector<double>& f64() const;
  const std::vector<float>& f32() const;
  std::vector<double>& f64();
  std::vector<float>& f32();

  /// value at flat index, widened to double regardless of dtype
  double value_at(size_t i) const;

  bool finite() const;
  bool operator==(const Tensor& other) const = default;

private:
  std::vector<size_t> shape_;
  std::variant<std::vector<double>, std::vector<float>> data_;
};

/// Per-layer, per-head row-stochastic attention matrices, laid out [L, M, N, N].
struct AttentionStack {
  size_t layers = 0;
  size_t heads = 0;
  size_t tokens = 0;
  Tensor data;

  /// throws NumericError unless every row sums to 1 within tol and all
  /// entries sit in [0, 1]
  void validate(double tol = 1e-6) const;

  /// head slice [N, N] as doubles
  ArrayD head(size_t layer, size_t head) const;
};

/// Per-layer token features, laid out [layers, N, D].
struct FeatureStack {
  size_t layers = 0;
  size_t tokens = 0;
  size_t dim = 0;
  Tensor data;

  void validate() const;

  /// layer slice [N, D] as doubles
  ArrayD layer(size_t layer) const;
};

}  // namespace attnkit

#endif  // ATTNKIT_TENSOR_HPP
