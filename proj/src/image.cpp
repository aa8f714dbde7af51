// SPDX-License-Identifier: Apache-2.0
#include "attnkit/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "attnkit/codecs.hpp"

namespace attnkit {

Image to_grayscale(const Image& rgb) {
  if (rgb.channels != 3) throw NumericError("to_grayscale expects a 3-channel image");
  Image out;
  out.height = rgb.height;
  out.width = rgb.width;
  out.channels = 3;
  out.pixels.resize(rgb.pixels.size());
  for (size_t i = 0; i < rgb.height * rgb.width; ++i) {
    double y = 0.299 * rgb.pixels[3 * i] + 0.587 * rgb.pixels[3 * i + 1] +
               0.114 * rgb.pixels[3 * i + 2];
    uint8_t v = static_cast<uint8_t>(std::lround(y));
    out.pixels[3 * i] = v;
    out.pixels[3 * i + 1] = v;
    out.pixels[3 * i + 2] = v;
  }
  return out;
}

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) throw CodecError("raster: truncated header");
  return tok;
}

}  // namespace

Image read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open '" + path + "'");
  std::string magic = next_token(in);
  size_t channels;
  if (magic == "P6") channels = 3;
  else if (magic == "P5") channels = 1;
  else throw CodecError("raster '" + path + "': unsupported magic '" + magic + "'");
  size_t width = std::stoul(next_token(in));
  size_t height = std::stoul(next_token(in));
  size_t maxval = std::stoul(next_token(in));
  if (maxval != 255) throw CodecError("raster '" + path + "': only maxval 255 supported");
  Image img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.pixels.resize(width * height * channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw CodecError("raster '" + path + "': truncated pixel data");
  return img;
}

void write_raster(const Image& image, const std::string& path) {
  if (image.channels != 1 && image.channels != 3)
    throw CodecError("write_raster: only 1- or 3-channel images supported");
  if (image.pixels.size() != image.width * image.height * image.channels)
    throw CodecError("write_raster: pixel buffer size mismatch");
  std::ostringstream out;
  out << (image.channels == 3 ? "P6" : "P5") << "\n"
      << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  write_text_atomic(path, out.str());
}

ArrayD image_to_array(const Image& image) {
  ArrayD out = ArrayD::zeros({image.height, image.width, image.channels});
  for (size_t i = 0; i < image.pixels.size(); ++i)
    out.data[i] = static_cast<double>(image.pixels[i]) / 255.0;
  return out;
}

Image array_to_image(const ArrayD& values) {
  if (values.rank() != 3) throw NumericError("array_to_image expects [H, W, C]");
  Image img;
  img.height = values.dim(0);
  img.width = values.dim(1);
  img.channels = values.dim(2);
  img.pixels.resize(values.numel());
  for (size_t i = 0; i < values.numel(); ++i) {
    double v = std::clamp(values.data[i], 0.0, 1.0);
    img.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

}  // namespace attnkit
