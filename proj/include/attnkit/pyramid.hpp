// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_PYRAMID_HPP
#define ATTNKIT_PYRAMID_HPP

#include <array>
#include <vector>

#include "attnkit/common.hpp"

namespace attnkit {

/// Which layers feed the four pyramid branches. Multi-layer mode follows the
/// depth-proportional recipe (L/3, L/2, 2L/3, L); last-layer mode wires all
/// four branches to the final layer.
struct PyramidConfig {
  std::array<size_t, 4> source_layers{};  // 1-based
  bool last_layer_mode = false;

  static PyramidConfig multi_layer(size_t depth);
  static PyramidConfig last_layer(size_t depth);
  void validate(size_t depth) const;
};

/// Branch weights for the transposed convolutions (kernel 2, stride 2).
/// Identity weights reproduce nearest-neighbor upsampling, which keeps the
/// shape contract exactly testable.
struct PyramidWeights {
  ArrayD deconv_quarter_1;  // [C, C, 2, 2], first upsample of the 1/4 branch
  ArrayD deconv_quarter_2;  // second upsample of the 1/4 branch
  ArrayD deconv_eighth;     // single upsample of the 1/8 branch

  static PyramidWeights identity(size_t channels);
};

/// [h, w, C] spatial map from [h*w, C] row-major tokens.
ArrayD tokens_to_map(const ArrayD& tokens, size_t grid_h, size_t grid_w);

/// Transposed convolution, kernel 2, stride 2: each input pixel expands into
/// a 2x2 output block.
ArrayD deconv2x2(const ArrayD& map, const ArrayD& weights);

/// Max pooling, kernel 2, stride 2. Spatial dims must be even.
ArrayD maxpool2x2(const ArrayD& map);

/// Bilinear resize with corner alignment, so a linear ramp resamples to an
/// exact linear ramp.
ArrayD bilinear_resize(const ArrayD& map, size_t out_h, size_t out_w);

/// Four feature maps at 1/4, 1/8, 1/16, 1/32 of the input resolution, built
/// from per-layer token features at the native 1/16 scale (patch stride 16).
/// The 1/4 branch applies two stride-2 transposed convolutions, 1/8 one,
/// 1/16 is the identity, and 1/32 is stride-2 max pooling.
std::array<ArrayD, 4> build_pyramid(const std::vector<ArrayD>& layer_tokens,
                                    const PyramidConfig& config, size_t grid_h, size_t grid_w,
                                    const PyramidWeights& weights);

/// Per-pixel linear classifier (1x1 convolution equivalent).
struct ProbeHead {
  ArrayD weight;  // [classes, in_channels]
  ArrayD bias;    // [classes]

  static ProbeHead zeros(size_t classes, size_t in_channels);
  size_t classes() const { return weight.dim(0); }
  size_t in_channels() const { return weight.dim(1); }
};

/// Linear-probing forward: bilinear-resize each probed layer's map to the
/// 1/4-resolution target, concatenate channels, apply the head. A single
/// probed layer realizes layerwise probing. Returns [out_h, out_w, classes].
ArrayD probe_forward(const std::vector<ArrayD>& layer_tokens,
                     const std::vector<size_t>& probed_layers, const ProbeHead& head,
                     size_t grid_h, size_t grid_w, size_t out_h, size_t out_w);

/// Pyramid-probing forward: build the four pyramid maps, resize each to the
/// 1/4 target, concatenate, apply the head.
ArrayD probe_forward_pyramid(const std::vector<ArrayD>& layer_tokens,
                             const PyramidConfig& config, const PyramidWeights& weights,
                             const ProbeHead& head, size_t grid_h, size_t grid_w, size_t out_h,
                             size_t out_w);

}  // namespace attnkit

#endif  // ATTNKIT_PYRAMID_HPP
