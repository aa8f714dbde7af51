// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_MODEL_HPP
#define ATTNKIT_MODEL_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnkit/autograd.hpp"
#include "attnkit/common.hpp"
#include "attnkit/tensor.hpp"

namespace attnkit {

/// Minimal ViT-style encoder: patch embedding, pre-norm blocks of multi-head
/// self-attention + GELU feedforward, fixed sinusoidal position embeddings,
/// no class token. The last block's head count can be overridden
/// (last_layer_heads) so a student can match a teacher's head count while
/// keeping its width, and an optional extra attention-only layer can be
/// appended as the alternative alignment mechanism.
struct ModelConfig {
  size_t depth = 2;
  size_t dim = 32;
  size_t heads = 4;
  size_t patch = 8;
  size_t image_h = 32;
  size_t image_w = 32;
  size_t mlp_ratio = 4;
  size_t channels = 3;
  size_t last_layer_heads = 0;   // 0 means same as heads
  bool learnable_pos = false;
  bool extra_attention_layer = false;
  size_t extra_layer_heads = 0;

  void validate() const;
  size_t grid_h() const { return image_h / patch; }
  size_t grid_w() const { return image_w / patch; }
  size_t tokens() const { return grid_h() * grid_w(); }
  size_t heads_at(size_t layer) const {  // 0-based layer index
    if (layer + 1 == depth && last_layer_heads != 0) return last_layer_heads;
    return heads;
  }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

template <typename T>
using ParamMap = std::map<std::string, Array<T>>;

/// Expected parameter names and shapes for a config.
std::map<std::string, std::vector<size_t>> param_shapes(const ModelConfig& config);

namespace detail {
std::string block_prefix(size_t layer);
}

/// Truncated-normal(0.02) projections, zero biases, unit layernorm gains.
template <typename T>
ParamMap<T> init_params(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamMap<T> params;
  for (const auto& [name, shape] : param_shapes(config)) {
    Array<T> a = Array<T>::zeros(shape);
    bool is_weight = name.ends_with(".weight") && name.find("ln") == std::string::npos;
    bool is_gain = name.find("ln") != std::string::npos && name.ends_with(".weight");
    if (name == "pos_embed" || is_weight)
      for (T& v : a.data) v = static_cast<T>(rng.trunc_normal(0.02));
    else if (is_gain)
      for (T& v : a.data) v = T(1);
    params.emplace(name, std::move(a));
  }
  return params;
}

/// [N, patch*patch*C] tokens from an [H, W, C] image, patches in row-major
/// grid order, pixels row-major within a patch.
template <typename T>
Array<T> patchify(const Array<T>& image, const ModelConfig& config) {
  if (image.rank() != 3 || image.dim(0) != config.image_h || image.dim(1) != config.image_w ||
      image.dim(2) != config.channels)
    throw NumericError("patchify: image shape does not match config");
  const size_t p = config.patch, c = config.channels;
  const size_t gh = config.grid_h(), gw = config.grid_w();
  Array<T> tokens = Array<T>::zeros({gh * gw, p * p * c});
  for (size_t ty = 0; ty < gh; ++ty)
    for (size_t tx = 0; tx < gw; ++tx) {
      size_t tok = ty * gw + tx;
      size_t out = 0;
      for (size_t py = 0; py < p; ++py)
        for (size_t px = 0; px < p; ++px)
          for (size_t ch = 0; ch < c; ++ch)
            tokens.data[tok * (p * p * c) + out++] =
                image.data[((ty * p + py) * config.image_w + (tx * p + px)) * c + ch];
    }
  return tokens;
}

/// Fixed 2D sin/cos position table [N, dim]; requires dim % 4 == 0.
ArrayD sinusoidal_pos_embed(size_t grid_h, size_t grid_w, size_t dim);

/// Node handles produced by one forward pass.
template <typename T>
struct ForwardNodes {
  std::vector<int> layer_features;                 // per block, post-residual [N, d]
  std::vector<std::vector<int>> attention_scores;  // per block, per head, pre-softmax [N, N]
  std::vector<std::vector<int>> attention_probs;   // per block, per head, post-softmax [N, N]
  std::vector<int> extra_scores;                   // extra alignment layer, if configured
  std::vector<int> extra_probs;
};

template <typename T>
std::map<std::string, int> make_param_nodes(Graph<T>& g, const ParamMap<T>& params,
                                            const ModelConfig& config, bool needs_grad) {
  auto expected = param_shapes(config);
  std::map<std::string, int> ids;
  for (const auto& [name, shape] : expected) {
    auto it = params.find(name);
    if (it == params.end()) throw NumericError("missing parameter '" + name + "'");
    if (it->second.shape != shape) throw NumericError("parameter '" + name + "' shape mismatch");
    ids[name] = g.input(it->second, needs_grad);
  }
  return ids;
}

/// Builds the encoder on the tape. `tokens` must be a [N, patch*patch*C]
/// node. Attention slices are exact softmax(q k^T / sqrt(d_head)) outputs.
template <typename T>
ForwardNodes<T> forward_graph(Graph<T>& g, const ModelConfig& config,
                              const std::map<std::string, int>& pid, int tokens) {
  config.validate();
  const size_t d = config.dim;
  ForwardNodes<T> out;

  auto p = [&](const std::string& name) {
    auto it = pid.find(name);
    if (it == pid.end()) throw NumericError("missing parameter node '" + name + "'");
    return it->second;
  };

  int x = g.linear(tokens, p("patch_embed.weight"), p("patch_embed.bias"));
  if (config.learnable_pos) {
    x = g.add(x, p("pos_embed"));
  } else {
    ArrayD pe = sinusoidal_pos_embed(config.grid_h(), config.grid_w(), d);
    Array<T> pe_t = Array<T>::zeros(pe.shape);
    for (size_t i = 0; i < pe.numel(); ++i) pe_t.data[i] = static_cast<T>(pe.data[i]);
    x = g.add(x, g.constant(std::move(pe_t)));
  }

  auto attention_sublayer = [&](int input, const std::string& prefix, size_t n_heads,
                                std::vector<int>& scores_out, std::vector<int>& probs_out) {
    const size_t head_dim = d / n_heads;
    int q = g.linear(input, p(prefix + "q.weight"), p(prefix + "q.bias"));
    int k = g.linear(input, p(prefix + "k.weight"), p(prefix + "k.bias"));
    int v = g.linear(input, p(prefix + "v.weight"), p(prefix + "v.bias"));
    std::vector<int> head_outputs;
    for (size_t m = 0; m < n_heads; ++m) {
      int qm = g.slice_cols(q, m * head_dim, (m + 1) * head_dim);
      int km = g.slice_cols(k, m * head_dim, (m + 1) * head_dim);
      int vm = g.slice_cols(v, m * head_dim, (m + 1) * head_dim);
      int scores = g.scale(g.matmul_t(qm, km),
                           static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim))));
      int probs = g.softmax_rows(scores);
      scores_out.push_back(scores);
      probs_out.push_back(probs);
      head_outputs.push_back(g.matmul(probs, vm));
    }
    int merged = g.concat_cols(head_outputs);
    return g.linear(merged, p(prefix + "proj.weight"), p(prefix + "proj.bias"));
  };

  for (size_t l = 0; l < config.depth; ++l) {
    std::string prefix = detail::block_prefix(l);
    std::vector<int> scores, probs;
    int normed = g.layernorm(x, p(prefix + "ln1.weight"), p(prefix + "ln1.bias"));
    int attn = attention_sublayer(normed, prefix + "attn.", config.heads_at(l), scores, probs);
    x = g.add(x, attn);
    int normed2 = g.layernorm(x, p(prefix + "ln2.weight"), p(prefix + "ln2.bias"));
    int h = g.gelu(g.linear(normed2, p(prefix + "mlp.fc1.weight"), p(prefix + "mlp.fc1.bias")));
    int mlp = g.linear(h, p(prefix + "mlp.fc2.weight"), p(prefix + "mlp.fc2.bias"));
    x = g.add(x, mlp);
    out.layer_features.push_back(x);
    out.attention_scores.push_back(std::move(scores));
    out.attention_probs.push_back(std::move(probs));
  }

  if (config.extra_attention_layer) {
    int normed = g.layernorm(x, p("extra_attn.ln.weight"), p("extra_attn.ln.bias"));
    attention_sublayer(normed, "extra_attn.", config.extra_layer_heads, out.extra_scores,
                       out.extra_probs);
  }
  return out;
}

template <typename T>
struct ForwardOutput {
  std::vector<Array<T>> layer_features;             // per block [N, d]
  std::vector<std::vector<Array<T>>> attention;     // per block, per head [N, N]
  std::vector<std::vector<Array<T>>> extra;         // extra layer heads, if configured
};

/// Eager forward for one image: runs the tape forward without gradients.
template <typename T>
ForwardOutput<T> forward_model(const ModelConfig& config, const ParamMap<T>& params,
                               const Array<T>& image) {
  Graph<T> g;
  auto pid = make_param_nodes(g, params, config, /*needs_grad=*/false);
  int tokens = g.constant(patchify(image, config));
  ForwardNodes<T> nodes = forward_graph(g, config, pid, tokens);
  ForwardOutput<T> out;
  for (size_t l = 0; l < nodes.layer_features.size(); ++l) {
    out.layer_features.push_back(g.value(nodes.layer_features[l]));
    std::vector<Array<T>> heads;
    for (int id : nodes.attention_probs[l]) heads.push_back(g.value(id));
    out.attention.push_back(std::move(heads));
  }
  if (config.extra_attention_layer) {
    std::vector<Array<T>> heads;
    for (int id : nodes.extra_probs) heads.push_back(g.value(id));
    out.extra.push_back(std::move(heads));
  }
  return out;
}

template <typename T>
std::vector<ForwardOutput<T>> forward_batch(const ModelConfig& config, const ParamMap<T>& params,
                                            const std::vector<Array<T>>& images) {
  std::vector<ForwardOutput<T>> outs;
  outs.reserve(images.size());
  for (const auto& img : images) outs.push_back(forward_model(config, params, img));
  return outs;
}

/// Packs a forward output into the dump containers. Requires a uniform head
/// count across blocks.
template <typename T>
AttentionStack to_attention_stack(const ForwardOutput<T>& fwd) {
  const size_t layers = fwd.attention.size();
  if (layers == 0) throw NumericError("to_attention_stack: empty forward output");
  const size_t heads = fwd.attention[0].size();
  const size_t tokens = fwd.attention[0][0].dim(0);
  std::vector<T> data;
  data.reserve(layers * heads * tokens * tokens);
  for (const auto& layer : fwd.attention) {
    if (layer.size() != heads)
      throw NumericError("to_attention_stack: head counts differ across layers");
    for (const auto& h : layer) data.insert(data.end(), h.data.begin(), h.data.end());
  }
  AttentionStack stack;
  stack.layers = layers;
  stack.heads = heads;
  stack.tokens = tokens;
  stack.data = Tensor({layers, heads, tokens, tokens}, std::move(data));
  return stack;
}

template <typename T>
FeatureStack to_feature_stack(const ForwardOutput<T>& fwd) {
  const size_t layers = fwd.layer_features.size();
  if (layers == 0) throw NumericError("to_feature_stack: empty forward output");
  const size_t tokens = fwd.layer_features[0].dim(0);
  const size_t dim = fwd.layer_features[0].dim(1);
  std::vector<T> data;
  data.reserve(layers * tokens * dim);
  for (const auto& f : fwd.layer_features) data.insert(data.end(), f.data.begin(), f.data.end());
  FeatureStack stack;
  stack.layers = layers;
  stack.tokens = tokens;
  stack.dim = dim;
  stack.data = Tensor({layers, tokens, dim}, std::move(data));
  return stack;
}

/// Reverse-mode gradients of a scalar loss over a parameter map. The builder
/// receives the tape and the parameter node ids and returns the loss node.
template <typename T>
ParamMap<T> gradients(
    const ModelConfig& config, const ParamMap<T>& params,
    const std::function<int(Graph<T>&, const std::map<std::string, int>&)>& loss_builder) {
  Graph<T> g;
  auto pid = make_param_nodes(g, params, config, /*needs_grad=*/true);
  int loss = loss_builder(g, pid);
  g.backward(loss);
  ParamMap<T> grads;
  for (const auto& [name, id] : pid) grads.emplace(name, g.grad(id));
  return grads;
}

// Checkpoint bridging (f32 or f64 per the training path's element type).
template <typename T>
std::vector<std::pair<std::string, Tensor>> params_to_tensors(const ParamMap<T>& params) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(params.size());
  for (const auto& [name, a] : params) out.emplace_back(name, Tensor(a.shape, a.data));
  return out;
}

template <typename T>
ParamMap<T> params_from_tensors(const std::map<std::string, Tensor>& tensors) {
  ParamMap<T> out;
  for (const auto& [name, t] : tensors) {
    Array<T> a = Array<T>::zeros(t.shape());
    for (size_t i = 0; i < t.numel(); ++i) a.data[i] = static_cast<T>(t.value_at(i));
    out.emplace(name, std::move(a));
  }
  return out;
}

}  // namespace attnkit

#endif  // ATTNKIT_MODEL_HPP
