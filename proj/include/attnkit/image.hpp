// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_IMAGE_HPP
#define ATTNKIT_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "attnkit/common.hpp"

namespace attnkit {

/// 8-bit raster, interleaved channels (1 = grayscale, 3 = RGB).
struct Image {
  size_t height = 0;
  size_t width = 0;
  size_t channels = 0;
  std::vector<uint8_t> pixels;  // row-major, channel-interleaved

  uint8_t at(size_t y, size_t x, size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  uint8_t& at(size_t y, size_t x, size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
};

/// Broadcast-standard luminance, replicated into three identical channels:
/// y = round(0.299 r + 0.587 g + 0.114 b).
Image to_grayscale(const Image& rgb);

// Binary PPM (P6, 3-channel) and PGM (P5, 1-channel), maxval 255.
Image read_raster(const std::string& path);
void write_raster(const Image& image, const std::string& path);

/// Image as [H, W, C] doubles scaled to [0, 1].
ArrayD image_to_array(const Image& image);
Image array_to_image(const ArrayD& values);

}  // namespace attnkit

#endif  // ATTNKIT_IMAGE_HPP
