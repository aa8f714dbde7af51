// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_PROBE_HPP
#define ATTNKIT_PROBE_HPP

#include <optional>
#include <vector>

#include "attnkit/model.hpp"
#include "attnkit/pyramid.hpp"

namespace attnkit {

/// One toy segmentation example: [H, W, C] image plus [H, W] class indices.
struct SegSample {
  ArrayD image;
  Array<int> labels;
};

struct IouReport {
  std::vector<double> per_class_iou;  // NaN-free; excluded classes are listed apart
  std::vector<size_t> class_ids;      // classes that entered the mean
  std::vector<size_t> excluded;       // absent from both prediction and target
  double mean_iou = 0.0;
};

/// Mean IoU over classes present in prediction or target; classes absent
/// from both are excluded from the mean and reported.
IouReport mean_iou(const std::vector<Array<int>>& predictions,
                   const std::vector<Array<int>>& targets, size_t num_classes);

enum class ProbeMode { lp, layerwise, multi_layer_pyramid, last_layer_pyramid };

std::string probe_mode_name(ProbeMode m);
ProbeMode probe_mode_from_name(const std::string& name);

struct ProbeTrainSettings {
  ProbeMode mode = ProbeMode::lp;
  std::vector<size_t> probed_layers;  // lp mode; empty = depth-proportional default
  size_t layer = 0;                   // layerwise mode, 1-based
  size_t num_classes = 4;
  size_t epochs = 150;                // full-batch Adam iterations on the head
  double lr = 0.05;
  size_t holdout_count = 4;
  uint64_t seed = 7;                  // reserved; the full-batch path is order-free
};

struct ProbeResult {
  ProbeHead head;
  IouReport holdout_iou;
};

/// Depth-proportional default probe layers: L/3, L/2, 2L/3, L.
std::vector<size_t> default_probe_layers(size_t depth);

/// Trains only the linear head on frozen backbone features (the backbone is
/// taken by const reference and never copied back, so its parameters are
/// bitwise untouched). Deterministic per seed. Evaluation happens at 1/4 of
/// the input resolution with nearest-neighbor label downsampling.
ProbeResult train_probe(const ModelConfig& backbone_config, const ParamMap<double>& backbone,
                        const std::vector<SegSample>& corpus,
                        const ProbeTrainSettings& settings);

}  // namespace attnkit

#endif  // ATTNKIT_PROBE_HPP
