// SPDX-License-Identifier: Apache-2.0
#include "attnkit/tensor.hpp"

namespace attnkit {

std::string dtype_name(Dtype d) { return d == Dtype::f64 ? "f64" : "f32"; }

Dtype dtype_from_name(const std::string& name) {
  if (name == "f64") return Dtype::f64;
  if (name == "f32") return Dtype::f32;
  throw CodecError("unknown dtype '" + name + "'");
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != std::get<std::vector<double>>(data_).size())
    throw NumericError("Tensor: shape/data size mismatch");
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != std::get<std::vector<float>>(data_).size())
    throw NumericError("Tensor: shape/data size mismatch");
}

Tensor Tensor::zeros(std::vector<size_t> shape, Dtype dtype) {
  size_t n = shape_numel(shape);
  if (dtype == Dtype::f64) return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

const std::vector<double>& Tensor::f64() const {
  if (dtype() != Dtype::f64) throw NumericError("Tensor: f64 access on f32 tensor");
  return std::get<std::vector<double>>(data_);
}

const std::vector<float>& Tensor::f32() const {
  if (dtype() != Dtype::f32) throw NumericError("Tensor: f32 access on f64 tensor");
  return std::get<std::vector<float>>(data_);
}

std::vector<double>& Tensor::f64() {
  if (dtype() != Dtype::f64) throw NumericError("Tensor: f64 access on f32 tensor");
  return std::get<std::vector<double>>(data_);
}

std::vector<float>& Tensor::f32() {
  if (dtype() != Dtype::f32) throw NumericError("Tensor: f32 access on f64 tensor");
  return std::get<std::vector<float>>(data_);
}

double Tensor::value_at(size_t i) const {
  if (dtype() == Dtype::f64) return f64()[i];
  return static_cast<double>(f32()[i]);
}

bool Tensor::finite() const {
  if (dtype() == Dtype::f64) return all_finite(f64());
  return all_finite(f32());
}

void AttentionStack::validate(double tol) const {
  const auto& s = data.shape();
  if (s.size() != 4 || s[0] != layers || s[1] != heads || s[2] != tokens || s[3] != tokens)
    throw NumericError("AttentionStack: shape does not match [L, M, N, N]");
  if (!data.finite()) throw NumericError("AttentionStack: non-finite entries");
  const size_t n = tokens;
  for (size_t l = 0; l < layers; ++l)
    for (size_t m = 0; m < heads; ++m)
      for (size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        size_t base = ((l * heads + m) * n + i) * n;
        for (size_t j = 0; j < n; ++j) {
          double v = data.value_at(base + j);
          if (v < -tol || v > 1.0 + tol)
            throw NumericError("AttentionStack: entry outside [0, 1]");
          row_sum += v;
        }
        if (std::fabs(row_sum - 1.0) > tol)
          throw NumericError("AttentionStack: row not stochastic (layer " +
                             std::to_string(l + 1) + ", head " + std::to_string(m + 1) +
                             ", row " + std::to_string(i) + ")");
      }
}

ArrayD AttentionStack::head(size_t layer, size_t head_idx) const {
  const size_t n = tokens;
  ArrayD out = ArrayD::zeros({n, n});
  size_t base = (layer * heads + head_idx) * n * n;
  for (size_t i = 0; i < n * n; ++i) out.data[i] = data.value_at(base + i);
  return out;
}

void FeatureStack::validate() const {
  const auto& s = data.shape();
  if (s.size() != 3 || s[0] != layers || s[1] != tokens || s[2] != dim)
    throw NumericError("FeatureStack: shape does not match [layers, N, D]");
  if (!data.finite()) throw NumericError("FeatureStack: non-finite entries");
}

ArrayD FeatureStack::layer(size_t layer_idx) const {
  ArrayD out = ArrayD::zeros({tokens, dim});
  size_t base = layer_idx * tokens * dim;
  for (size_t i = 0; i < tokens * dim; ++i) out.data[i] = data.value_at(base + i);
  return out;
}

}  // namespace attnkit
