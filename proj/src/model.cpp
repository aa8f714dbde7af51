// SPDX-License-Identifier: Apache-2.0
#include "attnkit/model.hpp"

#include <cmath>
#include <cstdio>

namespace attnkit {

using nlohmann::json;

void ModelConfig::validate() const {
  if (depth < 1) throw NumericError("config: depth must be >= 1");
  if (dim % heads != 0) throw NumericError("config: dim must be divisible by heads");
  if (dim % 4 != 0) throw NumericError("config: dim must be divisible by 4 (position table)");
  if (last_layer_heads != 0 && dim % last_layer_heads != 0)
    throw NumericError("config: dim (" + std::to_string(dim) +
                       ") not divisible by last-layer heads (" +
                       std::to_string(last_layer_heads) + ")");
  if (image_h % patch != 0 || image_w % patch != 0)
    throw NumericError("config: image size must be divisible by patch");
  if (extra_attention_layer) {
    if (extra_layer_heads == 0) throw NumericError("config: extra layer needs a head count");
    if (dim % extra_layer_heads != 0)
      throw NumericError("config: dim not divisible by extra-layer heads");
  }
  if (mlp_ratio < 1) throw NumericError("config: mlp_ratio must be >= 1");
}

json ModelConfig::to_json() const {
  return json{{"depth", depth},
              {"dim", dim},
              {"heads", heads},
              {"patch", patch},
              {"image", {image_h, image_w}},
              {"mlp_ratio", mlp_ratio},
              {"channels", channels},
              {"last_layer_heads", last_layer_heads},
              {"learnable_pos", learnable_pos},
              {"extra_attention_layer", extra_attention_layer},
              {"extra_layer_heads", extra_layer_heads}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.depth = j.at("depth").get<size_t>();
  c.dim = j.at("dim").get<size_t>();
  c.heads = j.at("heads").get<size_t>();
  c.patch = j.at("patch").get<size_t>();
  auto image = j.at("image").get<std::vector<size_t>>();
  if (image.size() != 2) throw CodecError("config: image must be [H, W]");
  c.image_h = image[0];
  c.image_w = image[1];
  c.mlp_ratio = j.value("mlp_ratio", size_t(4));
  c.channels = j.value("channels", size_t(3));
  c.last_layer_heads = j.value("last_layer_heads", size_t(0));
  c.learnable_pos = j.value("learnable_pos", false);
  c.extra_attention_layer = j.value("extra_attention_layer", false);
  c.extra_layer_heads = j.value("extra_layer_heads", size_t(0));
  c.validate();
  return c;
}

namespace detail {
std::string block_prefix(size_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "blocks.%02zu.", layer);
  return buf;
}
}  // namespace detail

std::map<std::string, std::vector<size_t>> param_shapes(const ModelConfig& config) {
  config.validate();
  const size_t d = config.dim;
  const size_t hidden = d * config.mlp_ratio;
  std::map<std::string, std::vector<size_t>> shapes;
  shapes["patch_embed.weight"] = {d, config.patch * config.patch * config.channels};
  shapes["patch_embed.bias"] = {d};
  if (config.learnable_pos) shapes["pos_embed"] = {config.tokens(), d};
  for (size_t l = 0; l < config.depth; ++l) {
    std::string p = detail::block_prefix(l);
    shapes[p + "ln1.weight"] = {d};
    shapes[p + "ln1.bias"] = {d};
    for (const char* proj : {"q", "k", "v", "proj"}) {
      shapes[p + "attn." + proj + ".weight"] = {d, d};
      shapes[p + "attn." + proj + ".bias"] = {d};
    }
    shapes[p + "ln2.weight"] = {d};
    shapes[p + "ln2.bias"] = {d};
    shapes[p + "mlp.fc1.weight"] = {hidden, d};
    shapes[p + "mlp.fc1.bias"] = {hidden};
    shapes[p + "mlp.fc2.weight"] = {d, hidden};
    shapes[p + "mlp.fc2.bias"] = {d};
  }
  if (config.extra_attention_layer) {
    shapes["extra_attn.ln.weight"] = {d};
    shapes["extra_attn.ln.bias"] = {d};
    for (const char* proj : {"q", "k", "v", "proj"}) {
      shapes[std::string("extra_attn.") + proj + ".weight"] = {d, d};
      shapes[std::string("extra_attn.") + proj + ".bias"] = {d};
    }
  }
  return shapes;
}

ArrayD sinusoidal_pos_embed(size_t grid_h, size_t grid_w, size_t dim) {
  if (dim % 4 != 0) throw NumericError("sinusoidal_pos_embed: dim must be divisible by 4");
  const size_t n = grid_h * grid_w;
  const size_t quarter = dim / 4;
  ArrayD out = ArrayD::zeros({n, dim});
  for (size_t tok = 0; tok < n; ++tok) {
    double row = static_cast<double>(tok / grid_w);
    double col = static_cast<double>(tok % grid_w);
    for (size_t k = 0; k < quarter; ++k) {
      double omega = 1.0 / std::pow(10000.0, static_cast<double>(k) / quarter);
      out.data[tok * dim + k] = std::sin(row * omega);
      out.data[tok * dim + quarter + k] = std::cos(row * omega);
      out.data[tok * dim + 2 * quarter + k] = std::sin(col * omega);
      out.data[tok * dim + 3 * quarter + k] = std::cos(col * omega);
    }
  }
  return out;
}

}  // namespace attnkit
