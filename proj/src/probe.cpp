// SPDX-License-Identifier: Apache-2.0
#include "attnkit/probe.hpp"

#include "attnkit/optim.hpp"

#include <algorithm>
#include <cmath>

namespace attnkit {

IouReport mean_iou(const std::vector<Array<int>>& predictions,
                   const std::vector<Array<int>>& targets, size_t num_classes) {
  if (predictions.size() != targets.size() || predictions.empty())
    throw NumericError("mean_iou: prediction/target counts differ or empty");
  std::vector<size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (size_t s = 0; s < predictions.size(); ++s) {
    const auto& p = predictions[s];
    const auto& t = targets[s];
    if (p.shape != t.shape) throw NumericError("mean_iou: shape mismatch");
    for (size_t i = 0; i < p.numel(); ++i) {
      int pv = p.data[i], tv = t.data[i];
      if (pv < 0 || tv < 0 || static_cast<size_t>(pv) >= num_classes ||
          static_cast<size_t>(tv) >= num_classes)
        throw NumericError("mean_iou: class index out of range");
      if (pv == tv) {
        ++tp[pv];
      } else {
        ++fp[pv];
        ++fn[tv];
      }
    }
  }
  IouReport report;
  double total = 0.0;
  for (size_t c = 0; c < num_classes; ++c) {
    size_t denom = tp[c] + fp[c] + fn[c];
    if (denom == 0) {
      report.excluded.push_back(c);
      continue;
    }
    double iou = static_cast<double>(tp[c]) / static_cast<double>(denom);
    report.per_class_iou.push_back(iou);
    report.class_ids.push_back(c);
    total += iou;
  }
  if (report.class_ids.empty()) throw NumericError("mean_iou: no classes present");
  report.mean_iou = total / static_cast<double>(report.class_ids.size());
  return report;
}

std::string probe_mode_name(ProbeMode m) {
  switch (m) {
    case ProbeMode::lp: return "lp";
    case ProbeMode::layerwise: return "layerwise";
    case ProbeMode::multi_layer_pyramid: return "multi-layer";
    case ProbeMode::last_layer_pyramid: return "ll-fpn";
  }
  throw NumericError("unreachable probe mode");
}

ProbeMode probe_mode_from_name(const std::string& name) {
  if (name == "lp") return ProbeMode::lp;
  if (name == "layerwise") return ProbeMode::layerwise;
  if (name == "multi-layer") return ProbeMode::multi_layer_pyramid;
  if (name == "ll-fpn") return ProbeMode::last_layer_pyramid;
  throw CodecError("unknown probe mode '" + name + "'");
}

std::vector<size_t> default_probe_layers(size_t depth) {
  return {std::max<size_t>(1, depth / 3), std::max<size_t>(1, depth / 2),
          std::max<size_t>(1, 2 * depth / 3), depth};
}

namespace {

// Nearest-neighbor label downsample to the probe resolution.
Array<int> downsample_labels(const Array<int>& labels, size_t out_h, size_t out_w) {
  const size_t h = labels.dim(0), w = labels.dim(1);
  Array<int> out = Array<int>::zeros({out_h, out_w});
  for (size_t y = 0; y < out_h; ++y)
    for (size_t x = 0; x < out_w; ++x) {
      size_t sy = std::min(h - 1, (y * h + h / 2) / out_h);
      size_t sx = std::min(w - 1, (x * w + w / 2) / out_w);
      out.data[y * out_w + x] = labels.data[sy * w + sx];
    }
  return out;
}

}  // namespace

ProbeResult train_probe(const ModelConfig& backbone_config, const ParamMap<double>& backbone,
                        const std::vector<SegSample>& corpus,
                        const ProbeTrainSettings& settings) {
  backbone_config.validate();
  if (corpus.size() <= settings.holdout_count)
    throw NumericError("train_probe: corpus not larger than holdout");
  const size_t train_count = corpus.size() - settings.holdout_count;
  const size_t out_h = backbone_config.image_h / 4;
  const size_t out_w = backbone_config.image_w / 4;
  const size_t gh = backbone_config.grid_h(), gw = backbone_config.grid_w();

  std::vector<size_t> probed = settings.probed_layers;
  PyramidConfig pyr;
  switch (settings.mode) {
    case ProbeMode::lp:
      if (probed.empty()) probed = default_probe_layers(backbone_config.depth);
      break;
    case ProbeMode::layerwise:
      if (settings.layer < 1 || settings.layer > backbone_config.depth)
        throw NumericError("train_probe: layerwise mode needs a valid --layer");
      probed = {settings.layer};
      break;
    case ProbeMode::multi_layer_pyramid:
      pyr = PyramidConfig::multi_layer(backbone_config.depth);
      break;
    case ProbeMode::last_layer_pyramid:
      pyr = PyramidConfig::last_layer(backbone_config.depth);
      break;
  }
  PyramidWeights weights = PyramidWeights::identity(backbone_config.dim);

  // Frozen backbone: features are computed once per image and cached as the
  // flattened probe input [out_h*out_w, C].
  auto probe_input = [&](const ArrayD& image) {
    ForwardOutput<double> fwd = forward_model(backbone_config, backbone, image);
    std::vector<ArrayD> resized;
    if (settings.mode == ProbeMode::lp || settings.mode == ProbeMode::layerwise) {
      for (size_t l : probed) {
        if (l < 1 || l > fwd.layer_features.size())
          throw NumericError("train_probe: probed layer out of range");
        resized.push_back(
            bilinear_resize(tokens_to_map(fwd.layer_features[l - 1], gh, gw), out_h, out_w));
      }
    } else {
      auto maps = build_pyramid(fwd.layer_features, pyr, gh, gw, weights);
      for (const auto& m : maps) resized.push_back(bilinear_resize(m, out_h, out_w));
    }
    const size_t pixels = out_h * out_w;
    size_t channels = 0;
    for (const auto& m : resized) channels += m.dim(2);
    ArrayD x = ArrayD::zeros({pixels, channels});
    size_t off = 0;
    for (const auto& m : resized) {
      const size_t c = m.dim(2);
      for (size_t p = 0; p < pixels; ++p)
        for (size_t ch = 0; ch < c; ++ch) x.data[p * channels + off + ch] = m.data[p * c + ch];
      off += c;
    }
    return x;
  };

  std::vector<ArrayD> inputs;
  std::vector<Array<int>> labels;
  inputs.reserve(corpus.size());
  labels.reserve(corpus.size());
  for (const auto& sample : corpus) {
    inputs.push_back(probe_input(sample.image));
    labels.push_back(downsample_labels(sample.labels, out_h, out_w));
  }

  const size_t channels = inputs[0].dim(1);
  const size_t k = settings.num_classes;
  ProbeHead head = ProbeHead::zeros(k, channels);

  // Full-batch Adam on the softmax cross entropy. The head is linear, the
  // objective convex, so this converges to the same optimum regardless of
  // ordering; the probe then measures feature quality, not optimizer noise.
  const size_t pixels = out_h * out_w;
  const double total_pixels = static_cast<double>(pixels * train_count);
  std::map<std::string, ArrayD> head_params{{"weight", head.weight}, {"bias", head.bias}};
  AdamWState<double> opt;
  opt.options.weight_decay = 0.0;
  for (size_t iter = 0; iter < settings.epochs; ++iter) {
    ArrayD grad_w = ArrayD::zeros({k, channels});
    ArrayD grad_b = ArrayD::zeros({k});
    const ArrayD& w = head_params.at("weight");
    const ArrayD& bias = head_params.at("bias");
    for (size_t idx = 0; idx < train_count; ++idx) {
      const ArrayD& x = inputs[idx];
      const Array<int>& y = labels[idx];
      for (size_t p = 0; p < pixels; ++p) {
        double mx = -1e300;
        std::vector<double> logits(k);
        for (size_t c = 0; c < k; ++c) {
          double acc = bias.data[c];
          for (size_t ch = 0; ch < channels; ++ch)
            acc += w.data[c * channels + ch] * x.data[p * channels + ch];
          logits[c] = acc;
          mx = std::max(mx, acc);
        }
        double sum = 0.0;
        for (size_t c = 0; c < k; ++c) sum += std::exp(logits[c] - mx);
        for (size_t c = 0; c < k; ++c) {
          double soft = std::exp(logits[c] - mx) / sum;
          double delta = (soft - (static_cast<size_t>(y.data[p]) == c ? 1.0 : 0.0)) /
                         total_pixels;
          grad_b.data[c] += delta;
          for (size_t ch = 0; ch < channels; ++ch)
            grad_w.data[c * channels + ch] += delta * x.data[p * channels + ch];
        }
      }
    }
    std::map<std::string, ArrayD> grads{{"weight", std::move(grad_w)},
                                        {"bias", std::move(grad_b)}};
    adamw_step(head_params, grads, opt, settings.lr);
  }
  head.weight = head_params.at("weight");
  head.bias = head_params.at("bias");

  // Held-out evaluation via argmax at the probe resolution.
  std::vector<Array<int>> preds, targets;
  for (size_t i = train_count; i < corpus.size(); ++i) {
    const ArrayD& x = inputs[i];
    Array<int> pred = Array<int>::zeros({out_h, out_w});
    for (size_t p = 0; p < pixels; ++p) {
      size_t best = 0;
      double best_v = -1e300;
      for (size_t c = 0; c < k; ++c) {
        double acc = head.bias.data[c];
        for (size_t ch = 0; ch < channels; ++ch)
          acc += head.weight.data[c * channels + ch] * x.data[p * channels + ch];
        if (acc > best_v) {
          best_v = acc;
          best = c;
        }
      }
      pred.data[p] = static_cast<int>(best);
    }
    preds.push_back(std::move(pred));
    targets.push_back(labels[i]);
  }
  ProbeResult result{std::move(head), mean_iou(preds, targets, k)};
  return result;
}

}  // namespace attnkit
