// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_CURATION_HPP
#define ATTNKIT_CURATION_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "attnkit/common.hpp"
#include "attnkit/manifest.hpp"

namespace attnkit {

/// Row-per-record embedding matrix tied to a manifest by row order.
struct EmbeddingSet {
  std::vector<std::string> ids;  // record paths in manifest order
  ArrayD vectors;                // [n, D]
  bool normalized = false;

  size_t count() const { return vectors.rank() == 2 ? vectors.dim(0) : 0; }

  /// L2-normalizes every row in place; zero rows are an error.
  void normalize();
  void validate() const;
};

/// One curation step's audit record.
struct CurationReport {
  std::string step;
  size_t input_count = 0;
  size_t output_count = 0;
  nlohmann::json parameters;
  nlohmann::json similarity_table;  // per-dataset table, filled by cross_similarity users

  nlohmann::json to_json() const;
};

/// Keeps, within each sequence, the frames whose index is congruent to the
/// sequence's smallest index mod k. Records without a sequence pass through.
/// Order is preserved; k = 1 is the identity; the filter is idempotent.
CorpusManifest interval_sample(const CorpusManifest& manifest, size_t k,
                               CurationReport* report = nullptr);

/// Streaming greedy near-duplicate filter in row order: a record is kept iff
/// its maximum cosine similarity to every previously kept record is < t. The
/// first record is always kept. Exact pairwise scan, no approximate index.
std::vector<size_t> greedy_dedup(const EmbeddingSet& embeddings, double threshold,
                                 CurationReport* report = nullptr);

/// Applies a kept-indices list to a manifest (helper for the dedup step).
CorpusManifest select_records(const CorpusManifest& manifest,
                              const std::vector<size_t>& kept);

/// Evenly samples `total` records across class labels; per-class quotas
/// differ by at most one, remainders go to lexicographically-first classes.
/// Deterministic per seed. A class with fewer records than its quota is an
/// error naming the class.
CorpusManifest balanced_subsample(const CorpusManifest& manifest, size_t total, uint64_t seed,
                                  CurationReport* report = nullptr);

/// Per-source transform applied while mixing (currently only grayscale
/// tagging is recorded; pixel conversion is a separate pipeline step).
struct SourceTransform {
  bool to_grayscale = false;
};

/// Concatenates manifests, preserving source order, recording provenance per
/// source. Path collisions across sources are an error.
CorpusManifest mix_manifests(const std::vector<CorpusManifest>& sources,
                             const std::vector<SourceTransform>& transforms,
                             CurationReport* report = nullptr);

struct CrossSimilarity {
  double mean_cosine = 0.0;
  size_t pairs_evaluated = 0;
  bool exact = true;  // false when the seeded pair sample was used
};

/// Mean cosine similarity over image-embedding pairs from two sets: exact
/// over all |A|*|B| pairs when that product is at most pair_cap, otherwise
/// estimated from pair_cap seeded uniform pairs.
CrossSimilarity cross_similarity(const EmbeddingSet& a, const EmbeddingSet& b, size_t pair_cap,
                                 uint64_t seed);

}  // namespace attnkit

#endif  // ATTNKIT_CURATION_HPP
