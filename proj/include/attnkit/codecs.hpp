// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_CODECS_HPP
#define ATTNKIT_CODECS_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "attnkit/tensor.hpp"

namespace attnkit {

// On-disk layouts. All multi-byte integers and all payload scalars are
// little-endian; payloads are row-major. Each format opens with an 8-byte
// ASCII magic, a 4-byte header length, and a JSON header.
inline constexpr char kAttentionMagic[] = "ATND0001";
inline constexpr char kFeatureMagic[] = "FETD0001";
inline constexpr char kCheckpointMagic[] = "CKPT0001";

void encode_attention_dump(const AttentionStack& stack, std::ostream& out);
AttentionStack decode_attention_dump(std::istream& in);

void encode_feature_dump(const FeatureStack& stack, std::ostream& out);
FeatureStack decode_feature_dump(std::istream& in);

/// Checkpoint header lists (name, shape, dtype, offset) per tensor, sorted by
/// name, so identical inputs always serialize to identical bytes.
void encode_checkpoint(const std::vector<std::pair<std::string, Tensor>>& params,
                       const nlohmann::json& config, std::ostream& out);

struct Checkpoint {
  std::map<std::string, Tensor> params;
  nlohmann::json config;
};
Checkpoint decode_checkpoint(std::istream& in);

// File-path conveniences (write is atomic: temp file + rename).
void write_attention_dump(const AttentionStack& stack, const std::string& path);
AttentionStack read_attention_dump(const std::string& path);
void write_feature_dump(const FeatureStack& stack, const std::string& path);
FeatureStack read_feature_dump(const std::string& path);
void write_checkpoint(const std::vector<std::pair<std::string, Tensor>>& params,
                      const nlohmann::json& config, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

/// Atomic text write: write to a temp file in the same directory, then rename.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace attnkit

#endif  // ATTNKIT_CODECS_HPP
