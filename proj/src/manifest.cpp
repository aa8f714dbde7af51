// SPDX-License-Identifier: Apache-2.0
#include "attnkit/manifest.hpp"

#include <sstream>
#include <unordered_set>

#include "attnkit/codecs.hpp"
#include "attnkit/common.hpp"

namespace attnkit {

using nlohmann::json;

std::string modality_name(Modality m) { return m == Modality::rgb ? "rgb" : "infrared"; }

Modality modality_from_name(const std::string& name) {
  if (name == "rgb") return Modality::rgb;
  if (name == "infrared") return Modality::infrared;
  throw CodecError("unknown modality '" + name + "'");
}

void CorpusManifest::add_provenance(std::string step, json params) {
  provenance.push_back({std::move(step), std::move(params)});
}

namespace {

ManifestRecord record_from_json(const json& j, size_t line_no) {
  auto fail = [line_no](const std::string& why) -> CodecError {
    return CodecError("manifest line " + std::to_string(line_no) + ": " + why);
  };
  if (!j.is_object()) throw fail("record is not an object");
  ManifestRecord r;
  if (!j.contains("path") || !j["path"].is_string()) throw fail("missing string field 'path'");
  r.path = j["path"].get<std::string>();
  if (!j.contains("source") || !j["source"].is_string())
    throw fail("missing string field 'source'");
  r.source = j["source"].get<std::string>();
  if (!j.contains("modality") || !j["modality"].is_string())
    throw fail("missing string field 'modality'");
  try {
    r.modality = modality_from_name(j["modality"].get<std::string>());
  } catch (const CodecError& e) {
    throw fail(e.what());
  }
  if (j.contains("sequence_id")) {
    if (!j["sequence_id"].is_string()) throw fail("'sequence_id' must be a string");
    r.sequence_id = j["sequence_id"].get<std::string>();
  }
  if (j.contains("frame_index")) {
    if (!j["frame_index"].is_number_integer()) throw fail("'frame_index' must be an integer");
    r.frame_index = j["frame_index"].get<int64_t>();
  }
  if (j.contains("class_label")) {
    if (!j["class_label"].is_string()) throw fail("'class_label' must be a string");
    r.class_label = j["class_label"].get<std::string>();
  }
  if (r.sequence_id.has_value() != r.frame_index.has_value())
    throw fail("frame_index must be present exactly when sequence_id is");
  return r;
}

json record_to_json(const ManifestRecord& r) {
  json j = {{"path", r.path}, {"source", r.source}, {"modality", modality_name(r.modality)}};
  if (r.sequence_id) j["sequence_id"] = *r.sequence_id;
  if (r.frame_index) j["frame_index"] = *r.frame_index;
  if (r.class_label) j["class_label"] = *r.class_label;
  return j;
}

}  // namespace

CorpusManifest parse_manifest(const std::string& text) {
  CorpusManifest manifest;
  std::unordered_set<std::string> seen_paths;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw CodecError("manifest line " + std::to_string(line_no) + ": invalid JSON");
    if (j.is_object() && j.contains("provenance")) {
      const json& p = j["provenance"];
      if (!p.is_object() || !p.contains("step") || !p["step"].is_string())
        throw CodecError("manifest line " + std::to_string(line_no) +
                         ": malformed provenance entry");
      manifest.provenance.push_back({p["step"].get<std::string>(),
                                     p.value("params", json::object())});
      continue;
    }
    ManifestRecord r = record_from_json(j, line_no);
    if (!seen_paths.insert(r.path).second)
      throw CodecError("manifest line " + std::to_string(line_no) + ": duplicate path '" +
                       r.path + "'");
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

std::string serialize_manifest(const CorpusManifest& manifest) {
  std::string out;
  for (const auto& p : manifest.provenance) {
    json j = {{"provenance", {{"step", p.step}, {"params", p.params}}}};
    out += j.dump();
    out += '\n';
  }
  for (const auto& r : manifest.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

CorpusManifest read_manifest(const std::string& path) { return parse_manifest(read_text(path)); }

void write_manifest(const CorpusManifest& manifest, const std::string& path) {
  write_text_atomic(path, serialize_manifest(manifest));
}

}  // namespace attnkit
