// SPDX-License-Identifier: Apache-2.0
#include "attnkit/codecs.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace attnkit {

namespace {

using nlohmann::json;

void put_u32_le(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw CodecError("truncated stream while reading header length");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_payload(std::ostream& out, const Tensor& t) {
  if (!t.finite()) throw CodecError("refusing to encode non-finite values");
  if (t.dtype() == Dtype::f64) {
    for (double v : t.f64()) {
      uint64_t bits = std::bit_cast<uint64_t>(v);
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFF);
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  } else {
    for (float v : t.f32()) {
      uint32_t bits = std::bit_cast<uint32_t>(v);
      unsigned char b[4];
      for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFF);
      out.write(reinterpret_cast<const char*>(b), 4);
    }
  }
}

Tensor get_payload(std::istream& in, std::vector<size_t> shape, Dtype dtype) {
  size_t n = shape_numel(shape);
  if (dtype == Dtype::f64) {
    std::vector<double> data(n);
    for (size_t i = 0; i < n; ++i) {
      unsigned char b[8];
      in.read(reinterpret_cast<char*>(b), 8);
      if (!in) throw CodecError("truncated payload");
      uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(b[k]) << (8 * k);
      data[i] = std::bit_cast<double>(bits);
    }
    Tensor t(std::move(shape), std::move(data));
    if (!t.finite()) throw CodecError("decoded payload contains non-finite values");
    return t;
  }
  std::vector<float> data(n);
  for (size_t i = 0; i < n; ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw CodecError("truncated payload");
    uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<uint32_t>(b[k]) << (8 * k);
    data[i] = std::bit_cast<float>(bits);
  }
  Tensor t(std::move(shape), std::move(data));
  if (!t.finite()) throw CodecError("decoded payload contains non-finite values");
  return t;
}

void expect_end(std::istream& in) {
  in.peek();
  if (!in.eof()) throw CodecError("trailing bytes after payload");
}

void put_header(std::ostream& out, const char* magic, const json& header) {
  out.write(magic, 8);
  std::string text = header.dump();
  put_u32_le(out, static_cast<uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

json get_header(std::istream& in, const char* magic) {
  char got[8];
  in.read(got, 8);
  if (!in || std::memcmp(got, magic, 8) != 0) throw CodecError("bad magic");
  uint32_t len = get_u32_le(in);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw CodecError("truncated header");
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded()) throw CodecError("header is not valid JSON");
  return header;
}

size_t header_count(const json& h, const char* key) {
  if (!h.contains(key) || !h[key].is_number_unsigned())
    throw CodecError(std::string("header missing count field '") + key + "'");
  return h[key].get<size_t>();
}

}  // namespace

void encode_attention_dump(const AttentionStack& stack, std::ostream& out) {
  stack.validate();
  json header = {{"layers", stack.layers},
                 {"heads", stack.heads},
                 {"tokens", stack.tokens},
                 {"dtype", dtype_name(stack.data.dtype())}};
  put_header(out, kAttentionMagic, header);
  put_payload(out, stack.data);
}

AttentionStack decode_attention_dump(std::istream& in) {
  json h = get_header(in, kAttentionMagic);
  AttentionStack stack;
  stack.layers = header_count(h, "layers");
  stack.heads = header_count(h, "heads");
  stack.tokens = header_count(h, "tokens");
  Dtype dtype = dtype_from_name(h.value("dtype", ""));
  stack.data = get_payload(in, {stack.layers, stack.heads, stack.tokens, stack.tokens}, dtype);
  expect_end(in);
  stack.validate();
  return stack;
}

void encode_feature_dump(const FeatureStack& stack, std::ostream& out) {
  stack.validate();
  json header = {{"layers", stack.layers},
                 {"tokens", stack.tokens},
                 {"dim", stack.dim},
                 {"dtype", dtype_name(stack.data.dtype())}};
  put_header(out, kFeatureMagic, header);
  put_payload(out, stack.data);
}

FeatureStack decode_feature_dump(std::istream& in) {
  json h = get_header(in, kFeatureMagic);
  FeatureStack stack;
  stack.layers = header_count(h, "layers");
  stack.tokens = header_count(h, "tokens");
  stack.dim = header_count(h, "dim");
  Dtype dtype = dtype_from_name(h.value("dtype", ""));
  stack.data = get_payload(in, {stack.layers, stack.tokens, stack.dim}, dtype);
  expect_end(in);
  stack.validate();
  return stack;
}

void encode_checkpoint(const std::vector<std::pair<std::string, Tensor>>& params,
                       const nlohmann::json& config, std::ostream& out) {
  std::vector<const std::pair<std::string, Tensor>*> sorted;
  sorted.reserve(params.size());
  for (const auto& p : params) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i]->first == sorted[i - 1]->first)
      throw CodecError("duplicate parameter name '" + sorted[i]->first + "'");

  json tensors = json::array();
  size_t offset = 0;
  for (const auto* p : sorted) {
    if (!p->second.finite())
      throw CodecError("refusing to encode non-finite values in '" + p->first + "'");
    tensors.push_back({{"name", p->first},
                       {"shape", p->second.shape()},
                       {"dtype", dtype_name(p->second.dtype())},
                       {"offset", offset}});
    offset += p->second.numel() * p->second.element_width();
  }
  json header = {{"config", config}, {"tensors", tensors}};
  put_header(out, kCheckpointMagic, header);
  for (const auto* p : sorted) put_payload(out, p->second);
}

Checkpoint decode_checkpoint(std::istream& in) {
  json h = get_header(in, kCheckpointMagic);
  if (!h.contains("tensors") || !h["tensors"].is_array())
    throw CodecError("checkpoint header missing tensor list");
  Checkpoint ckpt;
  ckpt.config = h.value("config", json::object());
  size_t expected_offset = 0;
  for (const auto& entry : h["tensors"]) {
    std::string name = entry.value("name", "");
    if (name.empty()) throw CodecError("checkpoint tensor entry missing name");
    if (ckpt.params.count(name)) throw CodecError("duplicate parameter name '" + name + "'");
    std::vector<size_t> shape = entry.value("shape", std::vector<size_t>{});
    Dtype dtype = dtype_from_name(entry.value("dtype", ""));
    if (entry.value("offset", size_t(0)) != expected_offset)
      throw CodecError("checkpoint offset mismatch for '" + name + "'");
    Tensor t = get_payload(in, shape, dtype);
    expected_offset += t.numel() * t.element_width();
    ckpt.params.emplace(std::move(name), std::move(t));
  }
  expect_end(in);
  return ckpt;
}

namespace {

template <typename Fn>
void write_file_atomic(const std::string& path, Fn&& fill) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CodecError("cannot open '" + tmp.string() + "' for writing");
    fill(out);
    out.flush();
    if (!out) throw CodecError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw CodecError("rename to '" + path + "' failed: " + ec.message());
}

}  // namespace

void write_attention_dump(const AttentionStack& stack, const std::string& path) {
  write_file_atomic(path, [&](std::ostream& out) { encode_attention_dump(stack, out); });
}

AttentionStack read_attention_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open '" + path + "'");
  return decode_attention_dump(in);
}

void write_feature_dump(const FeatureStack& stack, const std::string& path) {
  write_file_atomic(path, [&](std::ostream& out) { encode_feature_dump(stack, out); });
}

FeatureStack read_feature_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open '" + path + "'");
  return decode_feature_dump(in);
}

void write_checkpoint(const std::vector<std::pair<std::string, Tensor>>& params,
                      const nlohmann::json& config, const std::string& path) {
  write_file_atomic(path, [&](std::ostream& out) { encode_checkpoint(params, config, out); });
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open '" + path + "'");
  return decode_checkpoint(in);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  write_file_atomic(path, [&](std::ostream& out) { out.write(content.data(), content.size()); });
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace attnkit
