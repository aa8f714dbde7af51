// SPDX-License-Identifier: Apache-2.0
#include "attnkit/pyramid.hpp"

#include <algorithm>
#include <cmath>

namespace attnkit {

PyramidConfig PyramidConfig::multi_layer(size_t depth) {
  PyramidConfig c;
  c.source_layers = {std::max<size_t>(1, depth / 3), std::max<size_t>(1, depth / 2),
                     std::max<size_t>(1, 2 * depth / 3), depth};
  c.last_layer_mode = false;
  c.validate(depth);
  return c;
}

PyramidConfig PyramidConfig::last_layer(size_t depth) {
  PyramidConfig c;
  c.source_layers = {depth, depth, depth, depth};
  c.last_layer_mode = true;
  c.validate(depth);
  return c;
}

void PyramidConfig::validate(size_t depth) const {
  for (size_t l : source_layers)
    if (l < 1 || l > depth) throw NumericError("pyramid: source layer out of range");
  if (last_layer_mode)
    for (size_t l : source_layers)
      if (l != depth) throw NumericError("pyramid: last-layer mode requires all sources = L");
}

PyramidWeights PyramidWeights::identity(size_t channels) {
  auto make = [channels]() {
    ArrayD w = ArrayD::zeros({channels, channels, 2, 2});
    for (size_t c = 0; c < channels; ++c)
      for (size_t dy = 0; dy < 2; ++dy)
        for (size_t dx = 0; dx < 2; ++dx) w.data[((c * channels + c) * 2 + dy) * 2 + dx] = 1.0;
    return w;
  };
  return PyramidWeights{make(), make(), make()};
}

ArrayD tokens_to_map(const ArrayD& tokens, size_t grid_h, size_t grid_w) {
  if (tokens.rank() != 2 || tokens.dim(0) != grid_h * grid_w)
    throw NumericError("tokens_to_map: token count does not match grid");
  ArrayD out = tokens;
  out.shape = {grid_h, grid_w, tokens.dim(1)};
  return out;
}

ArrayD deconv2x2(const ArrayD& map, const ArrayD& weights) {
  if (map.rank() != 3) throw NumericError("deconv2x2: map must be [h, w, C]");
  const size_t h = map.dim(0), w = map.dim(1), cin = map.dim(2);
  if (weights.rank() != 4 || weights.dim(1) != cin || weights.dim(2) != 2 ||
      weights.dim(3) != 2)
    throw NumericError("deconv2x2: weights must be [Cout, Cin, 2, 2]");
  const size_t cout = weights.dim(0);
  ArrayD out = ArrayD::zeros({2 * h, 2 * w, cout});
  for (size_t y = 0; y < h; ++y)
    for (size_t x = 0; x < w; ++x)
      for (size_t co = 0; co < cout; ++co)
        for (size_t dy = 0; dy < 2; ++dy)
          for (size_t dx = 0; dx < 2; ++dx) {
            double acc = 0.0;
            for (size_t ci = 0; ci < cin; ++ci)
              acc += weights.data[((co * cin + ci) * 2 + dy) * 2 + dx] *
                     map.data[(y * w + x) * cin + ci];
            out.data[((2 * y + dy) * 2 * w + (2 * x + dx)) * cout + co] = acc;
          }
  return out;
}

ArrayD maxpool2x2(const ArrayD& map) {
  if (map.rank() != 3) throw NumericError("maxpool2x2: map must be [h, w, C]");
  const size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw NumericError("maxpool2x2: spatial dims must be even");
  ArrayD out = ArrayD::zeros({h / 2, w / 2, c});
  for (size_t y = 0; y < h / 2; ++y)
    for (size_t x = 0; x < w / 2; ++x)
      for (size_t ch = 0; ch < c; ++ch) {
        double m = map.data[((2 * y) * w + 2 * x) * c + ch];
        m = std::max(m, map.data[((2 * y) * w + 2 * x + 1) * c + ch]);
        m = std::max(m, map.data[((2 * y + 1) * w + 2 * x) * c + ch]);
        m = std::max(m, map.data[((2 * y + 1) * w + 2 * x + 1) * c + ch]);
        out.data[(y * (w / 2) + x) * c + ch] = m;
      }
  return out;
}

ArrayD bilinear_resize(const ArrayD& map, size_t out_h, size_t out_w) {
  if (map.rank() != 3) throw NumericError("bilinear_resize: map must be [h, w, C]");
  const size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  if (out_h < 1 || out_w < 1) throw NumericError("bilinear_resize: empty output");
  ArrayD out = ArrayD::zeros({out_h, out_w, c});
  // Corner-aligned sampling; degenerate axes collapse to index 0.
  auto src_coord = [](size_t dst, size_t out_n, size_t in_n) {
    if (out_n <= 1 || in_n <= 1) return 0.0;
    return static_cast<double>(dst) * static_cast<double>(in_n - 1) /
           static_cast<double>(out_n - 1);
  };
  for (size_t y = 0; y < out_h; ++y) {
    double sy = src_coord(y, out_h, h);
    size_t y0 = static_cast<size_t>(sy);
    size_t y1 = std::min(y0 + 1, h - 1);
    double fy = sy - static_cast<double>(y0);
    for (size_t x = 0; x < out_w; ++x) {
      double sx = src_coord(x, out_w, w);
      size_t x0 = static_cast<size_t>(sx);
      size_t x1 = std::min(x0 + 1, w - 1);
      double fx = sx - static_cast<double>(x0);
      for (size_t ch = 0; ch < c; ++ch) {
        double v00 = map.data[(y0 * w + x0) * c + ch];
        double v01 = map.data[(y0 * w + x1) * c + ch];
        double v10 = map.data[(y1 * w + x0) * c + ch];
        double v11 = map.data[(y1 * w + x1) * c + ch];
        out.data[(y * out_w + x) * c + ch] = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                             fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  }
  return out;
}

std::array<ArrayD, 4> build_pyramid(const std::vector<ArrayD>& layer_tokens,
                                    const PyramidConfig& config, size_t grid_h, size_t grid_w,
                                    const PyramidWeights& weights) {
  config.validate(layer_tokens.size());
  if (grid_h % 2 != 0 || grid_w % 2 != 0)
    throw NumericError("build_pyramid: native grid must be even for the 1/32 branch");
  std::array<ArrayD, 4> out;
  for (size_t b = 0; b < 4; ++b) {
    const ArrayD& tokens = layer_tokens[config.source_layers[b] - 1];
    ArrayD map = tokens_to_map(tokens, grid_h, grid_w);
    switch (b) {
      case 0: out[b] = deconv2x2(deconv2x2(map, weights.deconv_quarter_1),
                                 weights.deconv_quarter_2); break;
      case 1: out[b] = deconv2x2(map, weights.deconv_eighth); break;
      case 2: out[b] = map; break;
      case 3: out[b] = maxpool2x2(map); break;
    }
  }
  return out;
}

ProbeHead ProbeHead::zeros(size_t classes, size_t in_channels) {
  return ProbeHead{ArrayD::zeros({classes, in_channels}), ArrayD::zeros({classes})};
}

namespace {

ArrayD concat_channel_maps(const std::vector<ArrayD>& maps) {
  const size_t h = maps[0].dim(0), w = maps[0].dim(1);
  size_t total_c = 0;
  for (const auto& m : maps) {
    if (m.dim(0) != h || m.dim(1) != w)
      throw NumericError("probe: resized maps disagree on spatial dims");
    total_c += m.dim(2);
  }
  ArrayD out = ArrayD::zeros({h, w, total_c});
  size_t off = 0;
  for (const auto& m : maps) {
    const size_t c = m.dim(2);
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x)
        for (size_t ch = 0; ch < c; ++ch)
          out.data[(y * w + x) * total_c + off + ch] = m.data[(y * w + x) * c + ch];
    off += c;
  }
  return out;
}

ArrayD apply_head(const ArrayD& features, const ProbeHead& head) {
  const size_t h = features.dim(0), w = features.dim(1), c = features.dim(2);
  if (head.in_channels() != c)
    throw NumericError("probe head expects " + std::to_string(head.in_channels()) +
                       " channels, got " + std::to_string(c));
  const size_t k = head.classes();
  ArrayD out = ArrayD::zeros({h, w, k});
  for (size_t y = 0; y < h; ++y)
    for (size_t x = 0; x < w; ++x)
      for (size_t cls = 0; cls < k; ++cls) {
        double acc = head.bias.data[cls];
        for (size_t ch = 0; ch < c; ++ch)
          acc += head.weight.data[cls * c + ch] * features.data[(y * w + x) * c + ch];
        out.data[(y * w + x) * k + cls] = acc;
      }
  return out;
}

}  // namespace

ArrayD probe_forward(const std::vector<ArrayD>& layer_tokens,
                     const std::vector<size_t>& probed_layers, const ProbeHead& head,
                     size_t grid_h, size_t grid_w, size_t out_h, size_t out_w) {
  if (probed_layers.empty()) throw NumericError("probe_forward: no probed layers");
  std::vector<ArrayD> resized;
  for (size_t l : probed_layers) {
    if (l < 1 || l > layer_tokens.size())
      throw NumericError("probe_forward: probed layer out of range");
    resized.push_back(
        bilinear_resize(tokens_to_map(layer_tokens[l - 1], grid_h, grid_w), out_h, out_w));
  }
  return apply_head(concat_channel_maps(resized), head);
}

ArrayD probe_forward_pyramid(const std::vector<ArrayD>& layer_tokens,
                             const PyramidConfig& config, const PyramidWeights& weights,
                             const ProbeHead& head, size_t grid_h, size_t grid_w, size_t out_h,
                             size_t out_w) {
  std::array<ArrayD, 4> maps = build_pyramid(layer_tokens, config, grid_h, grid_w, weights);
  std::vector<ArrayD> resized;
  for (const auto& m : maps) resized.push_back(bilinear_resize(m, out_h, out_w));
  return apply_head(concat_channel_maps(resized), head);
}

}  // namespace attnkit
