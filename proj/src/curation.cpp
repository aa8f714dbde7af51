// SPDX-License-Identifier: Apache-2.0
#include "attnkit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace attnkit {

using nlohmann::json;

void EmbeddingSet::validate() const {
  if (vectors.rank() != 2) throw NumericError("embeddings must be [n, D]");
  if (!ids.empty() && ids.size() != vectors.dim(0))
    throw NumericError("embedding id count does not match row count");
  if (!all_finite(vectors.data)) throw NumericError("embeddings contain non-finite values");
  if (normalized) {
    const size_t n = vectors.dim(0), d = vectors.dim(1);
    for (size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      for (size_t j = 0; j < d; ++j) norm += vectors.data[i * d + j] * vectors.data[i * d + j];
      if (std::fabs(std::sqrt(norm) - 1.0) > 1e-6)
        throw NumericError("embedding row " + std::to_string(i) + " is not unit-norm");
    }
  }
}

void EmbeddingSet::normalize() {
  if (vectors.rank() != 2) throw NumericError("embeddings must be [n, D]");
  const size_t n = vectors.dim(0), d = vectors.dim(1);
  for (size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (size_t j = 0; j < d; ++j) norm += vectors.data[i * d + j] * vectors.data[i * d + j];
    norm = std::sqrt(norm);
    if (norm <= 0.0)
      throw NumericError("embedding row " + std::to_string(i) + " is a zero vector");
    for (size_t j = 0; j < d; ++j) vectors.data[i * d + j] /= norm;
  }
  normalized = true;
}

json CurationReport::to_json() const {
  json j = {{"step", step},
            {"input_count", input_count},
            {"output_count", output_count},
            {"parameters", parameters}};
  if (!similarity_table.is_null()) j["similarity_table"] = similarity_table;
  return j;
}

CorpusManifest interval_sample(const CorpusManifest& manifest, size_t k,
                               CurationReport* report) {
  if (k < 1) throw NumericError("interval_sample: k must be >= 1");
  // Smallest frame index per sequence anchors the congruence class.
  std::unordered_map<std::string, int64_t> min_index;
  for (const auto& r : manifest.records)
    if (r.sequence_id) {
      if (!r.frame_index)
        throw NumericError("interval_sample: record '" + r.path + "' has a sequence but no "
                           "frame index");
      auto it = min_index.find(*r.sequence_id);
      if (it == min_index.end() || *r.frame_index < it->second)
        min_index[*r.sequence_id] = *r.frame_index;
    }
  CorpusManifest out;
  out.provenance = manifest.provenance;
  for (const auto& r : manifest.records) {
    if (!r.sequence_id) {
      out.records.push_back(r);
      continue;
    }
    int64_t delta = *r.frame_index - min_index[*r.sequence_id];
    if (delta % static_cast<int64_t>(k) == 0) out.records.push_back(r);
  }
  out.add_provenance("interval_sample", json{{"k", k}});
  if (report) {
    report->step = "interval_sample";
    report->input_count = manifest.records.size();
    report->output_count = out.records.size();
    report->parameters = json{{"k", k}};
  }
  return out;
}

std::vector<size_t> greedy_dedup(const EmbeddingSet& embeddings, double threshold,
                                 CurationReport* report) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw NumericError("greedy_dedup: threshold must be in (0, 1]");
  EmbeddingSet working = embeddings;
  if (!working.normalized) working.normalize();
  working.validate();
  const size_t n = working.vectors.dim(0), d = working.vectors.dim(1);
  std::vector<size_t> kept;
  for (size_t i = 0; i < n; ++i) {
    bool keep = true;
    for (size_t kidx : kept) {
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j)
        dot += working.vectors.data[i * d + j] * working.vectors.data[kidx * d + j];
      if (dot >= threshold) {
        keep = false;
        break;
      }
    }
    if (keep) kept.push_back(i);
  }
  if (report) {
    report->step = "greedy_dedup";
    report->input_count = n;
    report->output_count = kept.size();
    report->parameters = json{{"threshold", threshold}};
  }
  return kept;
}

CorpusManifest select_records(const CorpusManifest& manifest,
                              const std::vector<size_t>& kept) {
  CorpusManifest out;
  out.provenance = manifest.provenance;
  for (size_t i : kept) {
    if (i >= manifest.records.size()) throw NumericError("select_records: index out of range");
    out.records.push_back(manifest.records[i]);
  }
  return out;
}

CorpusManifest balanced_subsample(const CorpusManifest& manifest, size_t total, uint64_t seed,
                                  CurationReport* report) {
  if (total > manifest.records.size())
    throw NumericError("balanced_subsample: requested more records than available");
  // Classes in lexicographic order; remainder quotas go to the first ones.
  std::map<std::string, std::vector<size_t>> by_class;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (!r.class_label)
      throw NumericError("balanced_subsample: record '" + r.path + "' has no class label");
    by_class[*r.class_label].push_back(i);
  }
  if (by_class.empty()) throw NumericError("balanced_subsample: empty manifest");
  const size_t classes = by_class.size();
  const size_t base = total / classes;
  size_t remainder = total % classes;

  Rng rng(seed);
  std::vector<size_t> chosen;
  chosen.reserve(total);
  for (auto& [label, indices] : by_class) {
    size_t quota = base + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
    if (indices.size() < quota)
      throw NumericError("balanced_subsample: class '" + label + "' has " +
                         std::to_string(indices.size()) + " records, quota " +
                         std::to_string(quota));
    // Partial Fisher-Yates: the first `quota` slots become the sample.
    for (size_t k = 0; k < quota; ++k) {
      size_t pick = k + static_cast<size_t>(rng.below(indices.size() - k));
      std::swap(indices[k], indices[pick]);
      chosen.push_back(indices[k]);
    }
  }
  std::sort(chosen.begin(), chosen.end());  // keep manifest order in the output

  CorpusManifest out = select_records(manifest, chosen);
  out.add_provenance("balanced_subsample", json{{"total", total}, {"seed", seed}});
  if (report) {
    report->step = "balanced_subsample";
    report->input_count = manifest.records.size();
    report->output_count = out.records.size();
    report->parameters = json{{"total", total}, {"seed", seed}, {"classes", classes}};
  }
  return out;
}

CorpusManifest mix_manifests(const std::vector<CorpusManifest>& sources,
                             const std::vector<SourceTransform>& transforms,
                             CurationReport* report) {
  if (!transforms.empty() && transforms.size() != sources.size())
    throw NumericError("mix_manifests: transform list length mismatch");
  CorpusManifest out;
  std::unordered_set<std::string> seen;
  size_t input_total = 0;
  for (size_t s = 0; s < sources.size(); ++s) {
    input_total += sources[s].records.size();
    for (const auto& r : sources[s].records) {
      if (!seen.insert(r.path).second)
        throw NumericError("mix_manifests: path collision on '" + r.path + "'");
      out.records.push_back(r);
    }
    json params = {{"source_index", s}, {"count", sources[s].records.size()}};
    if (!transforms.empty() && transforms[s].to_grayscale) params["grayscale"] = true;
    out.add_provenance("mix_source", params);
  }
  if (report) {
    report->step = "mix_manifests";
    report->input_count = input_total;
    report->output_count = out.records.size();
    report->parameters = json{{"sources", sources.size()}};
  }
  return out;
}

CrossSimilarity cross_similarity(const EmbeddingSet& a, const EmbeddingSet& b, size_t pair_cap,
                                 uint64_t seed) {
  if (a.count() == 0 || b.count() == 0)
    throw NumericError("cross_similarity: both sets must be nonempty");
  EmbeddingSet na = a, nb = b;
  if (!na.normalized) na.normalize();
  if (!nb.normalized) nb.normalize();
  const size_t n_a = na.count(), n_b = nb.count(), d = na.vectors.dim(1);
  if (nb.vectors.dim(1) != d) throw NumericError("cross_similarity: dims differ");

  auto cosine = [&](size_t i, size_t j) {
    double dot = 0.0;
    for (size_t k = 0; k < d; ++k)
      dot += na.vectors.data[i * d + k] * nb.vectors.data[j * d + k];
    return dot;
  };

  CrossSimilarity result;
  if (n_a * n_b <= pair_cap) {
    double total = 0.0;
    for (size_t i = 0; i < n_a; ++i)
      for (size_t j = 0; j < n_b; ++j) total += cosine(i, j);
    result.mean_cosine = total / static_cast<double>(n_a * n_b);
    result.pairs_evaluated = n_a * n_b;
    result.exact = true;
  } else {
    Rng rng(seed);
    double total = 0.0;
    for (size_t p = 0; p < pair_cap; ++p)
      total += cosine(static_cast<size_t>(rng.below(n_a)),
                      static_cast<size_t>(rng.below(n_b)));
    result.mean_cosine = total / static_cast<double>(pair_cap);
    result.pairs_evaluated = pair_cap;
    result.exact = false;
  }
  return result;
}

}  // namespace attnkit
