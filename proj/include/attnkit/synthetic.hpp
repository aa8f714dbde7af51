// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_SYNTHETIC_HPP
#define ATTNKIT_SYNTHETIC_HPP

#include <vector>

#include "attnkit/model.hpp"
#include "attnkit/probe.hpp"

namespace attnkit {

/// Deterministic desk-scale corpus: geometric shapes (rectangle, disk,
/// triangle) on uniform-noise backgrounds, three identical channels, with
/// per-pixel class labels (0 background, 1..3 per shape kind).
struct ShapesCorpusSpec {
  size_t count = 64;
  size_t image_h = 48;
  size_t image_w = 48;
  size_t channels = 3;
  uint64_t seed = 11;
  // With uniform_intensity set, every shape renders at the same brightness,
  // so class identity is carried by geometry alone and a per-pixel intensity
  // readout cannot solve the segmentation task.
  bool uniform_intensity = false;
};

inline constexpr size_t kShapeClasses = 4;  // background + 3 shapes

std::vector<SegSample> make_shapes_corpus(const ShapesCorpusSpec& spec);

/// Images only, as Array<T> in [0, 1], for the distillation corpus.
template <typename T>
std::vector<Array<T>> corpus_images(const std::vector<SegSample>& corpus) {
  std::vector<Array<T>> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) {
    Array<T> img = Array<T>::zeros(s.image.shape);
    for (size_t i = 0; i < img.numel(); ++i) img.data[i] = static_cast<T>(s.image.data[i]);
    out.push_back(std::move(img));
  }
  return out;
}

/// Majority label per patch, flattened in token order; the teacher's
/// per-token classification targets.
std::vector<size_t> token_labels(const SegSample& sample, size_t patch);

/// Trains a model on per-token shape classification with a linear head on
/// the last layer's features. This is how fixture teachers acquire
/// structured attention; the head is discarded, only backbone parameters are
/// returned. Deterministic per seed.
template <typename T>
ParamMap<T> pretrain_token_classifier(const ModelConfig& config,
                                      const std::vector<SegSample>& corpus, size_t steps,
                                      size_t batch_size, double lr, uint64_t seed);

extern template ParamMap<float> pretrain_token_classifier<float>(const ModelConfig&,
                                                                 const std::vector<SegSample>&,
                                                                 size_t, size_t, double,
                                                                 uint64_t);
extern template ParamMap<double> pretrain_token_classifier<double>(
    const ModelConfig&, const std::vector<SegSample>&, size_t, size_t, double, uint64_t);

/// Trains a model to regress each token's own patch pixels from last-layer
/// features (linear reconstruction head, mean squared error). Deep layers
/// must keep local information to solve this, so their attention stays
/// structured rather than collapsing. The head is discarded.
template <typename T>
ParamMap<T> pretrain_patch_autoencoder(const ModelConfig& config,
                                       const std::vector<SegSample>& corpus, size_t steps,
                                       size_t batch_size, double lr, uint64_t seed);

extern template ParamMap<float> pretrain_patch_autoencoder<float>(const ModelConfig&,
                                                                  const std::vector<SegSample>&,
                                                                  size_t, size_t, double,
                                                                  uint64_t);
extern template ParamMap<double> pretrain_patch_autoencoder<double>(
    const ModelConfig&, const std::vector<SegSample>&, size_t, size_t, double, uint64_t);

}  // namespace attnkit

#endif  // ATTNKIT_SYNTHETIC_HPP
