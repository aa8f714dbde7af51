// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_OPTIM_HPP
#define ATTNKIT_OPTIM_HPP

#include <cmath>
#include <map>
#include <string>

#include "attnkit/common.hpp"

namespace attnkit {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.05;
  double eps = 1e-8;
};

/// Per-parameter first/second moments plus the shared step count.
template <typename T>
struct AdamWState {
  std::map<std::string, Array<T>> first_moment;
  std::map<std::string, Array<T>> second_moment;
  int64_t step = 0;
  AdamWOptions options;
};

/// One decoupled-weight-decay Adam update with bias-corrected moments.
/// Moments are created lazily, shaped like their parameters.
template <typename T>
void adamw_step(std::map<std::string, Array<T>>& params,
                const std::map<std::string, Array<T>>& grads, AdamWState<T>& state, double lr) {
  state.step += 1;
  const double b1 = state.options.beta1, b2 = state.options.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw NumericError("adamw_step: missing gradient for '" + name + "'");
    const Array<T>& g = git->second;
    if (g.shape != p.shape) throw NumericError("adamw_step: gradient shape mismatch for '" +
                                               name + "'");
    Array<T>& m = state.first_moment.try_emplace(name, Array<T>::zeros(p.shape)).first->second;
    Array<T>& v = state.second_moment.try_emplace(name, Array<T>::zeros(p.shape)).first->second;
    for (size_t i = 0; i < p.numel(); ++i) {
      double gi = static_cast<double>(g.data[i]);
      double mi = b1 * static_cast<double>(m.data[i]) + (1.0 - b1) * gi;
      double vi = b2 * static_cast<double>(v.data[i]) + (1.0 - b2) * gi * gi;
      m.data[i] = static_cast<T>(mi);
      v.data[i] = static_cast<T>(vi);
      double update = (mi / bc1) / (std::sqrt(vi / bc2) + state.options.eps);
      double decayed = static_cast<double>(p.data[i]) * state.options.weight_decay;
      p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) - lr * (update + decayed));
    }
  }
}

/// Linear warmup from 0 to peak, then cosine decay to 0 at total_steps.
/// Peak follows the linear scaling rule: base_lr * batch_size / 256.
struct LrSchedule {
  double base_lr = 1e-4;
  size_t batch_size = 256;
  size_t warmup_steps = 0;
  size_t total_steps = 1;

  double peak() const { return base_lr * static_cast<double>(batch_size) / 256.0; }
};

double lr_at(size_t step, const LrSchedule& schedule);

}  // namespace attnkit

#endif  // ATTNKIT_OPTIM_HPP
