// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_MANIFEST_HPP
#define ATTNKIT_MANIFEST_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace attnkit {

enum class Modality { rgb, infrared };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

struct ManifestRecord {
  std::string path;
  std::string source;
  Modality modality = Modality::rgb;
  std::optional<std::string> sequence_id;
  std::optional<int64_t> frame_index;
  std::optional<std::string> class_label;

  bool operator==(const ManifestRecord&) const = default;
};

struct ProvenanceEntry {
  std::string step;
  nlohmann::json params;
};

/// Ordered image records plus the curation steps already applied to them.
/// Serialized as UTF-8 with one JSON record per line; provenance lines carry
/// a top-level "provenance" key and precede the records.
struct CorpusManifest {
  std::vector<ManifestRecord> records;
  std::vector<ProvenanceEntry> provenance;

  void add_provenance(std::string step, nlohmann::json params);
};

/// Parses line-oriented manifest text. Fails on the first malformed line
/// (error names the 1-based line), on duplicate paths, and when frame_index
/// and sequence_id do not appear together.
CorpusManifest parse_manifest(const std::string& text);

std::string serialize_manifest(const CorpusManifest& manifest);

CorpusManifest read_manifest(const std::string& path);
void write_manifest(const CorpusManifest& manifest, const std::string& path);

}  // namespace attnkit

#endif  // ATTNKIT_MANIFEST_HPP
