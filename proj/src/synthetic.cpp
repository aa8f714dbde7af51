// SPDX-License-Identifier: Apache-2.0
#include "attnkit/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "attnkit/optim.hpp"

namespace attnkit {

namespace {

struct Shape {
  int kind;  // 1 rect, 2 disk, 3 triangle
  double cy, cx, size, intensity;
};

bool inside(const Shape& s, double y, double x) {
  double dy = y - s.cy, dx = x - s.cx;
  switch (s.kind) {
    case 1: return std::fabs(dy) <= s.size && std::fabs(dx) <= s.size;
    case 2: return dy * dy + dx * dx <= s.size * s.size;
    case 3: return dy >= -s.size && dy <= s.size && std::fabs(dx) <= (s.size - dy) * 0.5 + 0.5;
    default: return false;
  }
}

}  // namespace

std::vector<SegSample> make_shapes_corpus(const ShapesCorpusSpec& spec) {
  Rng rng(spec.seed);
  std::vector<SegSample> corpus;
  corpus.reserve(spec.count);
  for (size_t n = 0; n < spec.count; ++n) {
    SegSample sample;
    sample.image = ArrayD::zeros({spec.image_h, spec.image_w, spec.channels});
    sample.labels = Array<int>::zeros({spec.image_h, spec.image_w});

    // Low-contrast noise background.
    std::vector<double> background(spec.image_h * spec.image_w);
    for (double& v : background) v = rng.uniform(0.05, 0.25);

    size_t shape_count = 1 + static_cast<size_t>(rng.below(3));
    std::vector<Shape> shapes;
    for (size_t s = 0; s < shape_count; ++s) {
      Shape sh;
      sh.kind = 1 + static_cast<int>(rng.below(3));
      sh.cy = rng.uniform(0.2, 0.8) * spec.image_h;
      sh.cx = rng.uniform(0.2, 0.8) * spec.image_w;
      sh.size = rng.uniform(0.12, 0.28) * std::min(spec.image_h, spec.image_w);
      sh.intensity = spec.uniform_intensity ? 0.8 : rng.uniform(0.55, 0.95);
      shapes.push_back(sh);
    }

    for (size_t y = 0; y < spec.image_h; ++y)
      for (size_t x = 0; x < spec.image_w; ++x) {
        double v = background[y * spec.image_w + x];
        int label = 0;
        for (const auto& sh : shapes)
          if (inside(sh, static_cast<double>(y), static_cast<double>(x))) {
            v = sh.intensity;
            label = sh.kind;
          }
        for (size_t c = 0; c < spec.channels; ++c)
          sample.image.data[(y * spec.image_w + x) * spec.channels + c] = v;
        sample.labels.data[y * spec.image_w + x] = label;
      }
    corpus.push_back(std::move(sample));
  }
  return corpus;
}

std::vector<size_t> token_labels(const SegSample& sample, size_t patch) {
  const size_t h = sample.labels.dim(0), w = sample.labels.dim(1);
  if (h % patch != 0 || w % patch != 0)
    throw NumericError("token_labels: image not divisible by patch");
  const size_t gh = h / patch, gw = w / patch;
  std::vector<size_t> out(gh * gw, 0);
  for (size_t ty = 0; ty < gh; ++ty)
    for (size_t tx = 0; tx < gw; ++tx) {
      size_t counts[kShapeClasses] = {0, 0, 0, 0};
      for (size_t py = 0; py < patch; ++py)
        for (size_t px = 0; px < patch; ++px)
          ++counts[sample.labels.data[(ty * patch + py) * w + (tx * patch + px)]];
      size_t best = 0;
      for (size_t c = 1; c < kShapeClasses; ++c)
        if (counts[c] > counts[best]) best = c;
      out[ty * gw + tx] = best;
    }
  return out;
}

template <typename T>
ParamMap<T> pretrain_token_classifier(const ModelConfig& config,
                                      const std::vector<SegSample>& corpus, size_t steps,
                                      size_t batch_size, double lr, uint64_t seed) {
  config.validate();
  if (corpus.empty()) throw NumericError("pretrain_token_classifier: empty corpus");
  ParamMap<T> params = init_params<T>(config, seed);

  // Linear classification head on last-layer features; trained jointly,
  // dropped from the returned map.
  Rng head_rng(seed + 17);
  Array<T> head_w = Array<T>::zeros({kShapeClasses, config.dim});
  for (T& v : head_w.data) v = static_cast<T>(head_rng.trunc_normal(0.02));
  Array<T> head_b = Array<T>::zeros({kShapeClasses});

  std::vector<std::vector<size_t>> labels;
  std::vector<Array<T>> images;
  for (const auto& s : corpus) {
    labels.push_back(token_labels(s, config.patch));
    Array<T> img = Array<T>::zeros(s.image.shape);
    for (size_t i = 0; i < img.numel(); ++i) img.data[i] = static_cast<T>(s.image.data[i]);
    images.push_back(std::move(img));
  }

  AdamWState<T> opt;
  opt.options.weight_decay = 0.05;
  LrSchedule schedule{lr, 256, std::min<size_t>(steps / 10, 50), steps};
  Rng sampler(seed + 1);

  for (size_t step = 0; step < steps; ++step) {
    Graph<T> g;
    auto pid = make_param_nodes(g, params, config, true);
    int hw = g.input(head_w, true);
    int hb = g.input(head_b, true);
    std::vector<int> losses;
    for (size_t b = 0; b < batch_size; ++b) {
      size_t idx = static_cast<size_t>(sampler.below(images.size()));
      int tokens = g.constant(patchify(images[idx], config));
      ForwardNodes<T> fwd = forward_graph(g, config, pid, tokens);
      int logits = g.linear(fwd.layer_features.back(), hw, hb);
      losses.push_back(g.softmax_xent_rows(logits, labels[idx]));
    }
    int loss = g.mean_scalars(losses);
    g.backward(loss);
    ParamMap<T> grads;
    for (const auto& [name, id] : pid) grads.emplace(name, g.grad(id));
    grads.emplace("head.weight", g.grad(hw));
    grads.emplace("head.bias", g.grad(hb));
    ParamMap<T> all = params;
    all.emplace("head.weight", head_w);
    all.emplace("head.bias", head_b);
    adamw_step(all, grads, opt, lr_at(step, schedule));
    head_w = all.at("head.weight");
    head_b = all.at("head.bias");
    all.erase("head.weight");
    all.erase("head.bias");
    params = std::move(all);
  }
  return params;
}

template ParamMap<float> pretrain_token_classifier<float>(const ModelConfig&,
                                                          const std::vector<SegSample>&, size_t,
                                                          size_t, double, uint64_t);
template ParamMap<double> pretrain_token_classifier<double>(const ModelConfig&,
                                                            const std::vector<SegSample>&,
                                                            size_t, size_t, double, uint64_t);

template <typename T>
ParamMap<T> pretrain_patch_autoencoder(const ModelConfig& config,
                                       const std::vector<SegSample>& corpus, size_t steps,
                                       size_t batch_size, double lr, uint64_t seed) {
  config.validate();
  if (corpus.empty()) throw NumericError("pretrain_patch_autoencoder: empty corpus");
  ParamMap<T> params = init_params<T>(config, seed);

  const size_t patch_dim = config.patch * config.patch * config.channels;
  Rng head_rng(seed + 17);
  Array<T> head_w = Array<T>::zeros({patch_dim, config.dim});
  for (T& v : head_w.data) v = static_cast<T>(head_rng.trunc_normal(0.02));
  Array<T> head_b = Array<T>::zeros({patch_dim});

  std::vector<Array<T>> tokens;
  for (const auto& s : corpus) {
    Array<T> img = Array<T>::zeros(s.image.shape);
    for (size_t i = 0; i < img.numel(); ++i) img.data[i] = static_cast<T>(s.image.data[i]);
    tokens.push_back(patchify(img, config));
  }
  const T inv_numel = static_cast<T>(1.0 / static_cast<double>(tokens[0].numel()));

  AdamWState<T> opt;
  opt.options.weight_decay = 0.05;
  LrSchedule schedule{lr, 256, std::min<size_t>(steps / 10, 50), steps};
  Rng sampler(seed + 1);

  for (size_t step = 0; step < steps; ++step) {
    Graph<T> g;
    auto pid = make_param_nodes(g, params, config, true);
    int hw = g.input(head_w, true);
    int hb = g.input(head_b, true);
    std::vector<int> losses;
    for (size_t b = 0; b < batch_size; ++b) {
      size_t idx = static_cast<size_t>(sampler.below(tokens.size()));
      int input = g.constant(tokens[idx]);
      ForwardNodes<T> fwd = forward_graph(g, config, pid, input);
      int recon = g.linear(fwd.layer_features.back(), hw, hb);
      int diff = g.add(recon, g.scale(input, T(-1)));
      losses.push_back(g.scale(g.sum_all(g.mul(diff, diff)), inv_numel));
    }
    int loss = g.mean_scalars(losses);
    g.backward(loss);
    ParamMap<T> grads;
    for (const auto& [name, id] : pid) grads.emplace(name, g.grad(id));
    grads.emplace("head.weight", g.grad(hw));
    grads.emplace("head.bias", g.grad(hb));
    ParamMap<T> all = params;
    all.emplace("head.weight", head_w);
    all.emplace("head.bias", head_b);
    adamw_step(all, grads, opt, lr_at(step, schedule));
    head_w = all.at("head.weight");
    head_b = all.at("head.bias");
    all.erase("head.weight");
    all.erase("head.bias");
    params = std::move(all);
  }
  return params;
}

template ParamMap<float> pretrain_patch_autoencoder<float>(const ModelConfig&,
                                                           const std::vector<SegSample>&,
                                                           size_t, size_t, double, uint64_t);
template ParamMap<double> pretrain_patch_autoencoder<double>(const ModelConfig&,
                                                             const std::vector<SegSample>&,
                                                             size_t, size_t, double, uint64_t);

}  // namespace attnkit
