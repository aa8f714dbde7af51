// SPDX-License-Identifier: Apache-2.0
#ifndef ATTNKIT_DISTILL_HPP
#define ATTNKIT_DISTILL_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "attnkit/model.hpp"
#include "attnkit/nmi.hpp"
#include "attnkit/optim.hpp"

namespace attnkit {

enum class LossKind { attention_kl, feature_cosine, attention_kl_multilayer };
enum class HeadAlignment { adaptive_heads, extra_attention_layer };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);
std::string head_alignment_name(HeadAlignment a);
HeadAlignment head_alignment_from_name(const std::string& name);

/// Everything a distillation run needs beyond the two models and the corpus.
struct DistillPlan {
  size_t teacher_target_layer = 0;  // 1-based; 0 selects by NMI on the corpus
  LossKind loss_kind = LossKind::attention_kl;
  std::vector<size_t> multilayer_targets;  // 1-based, used by the multilayer kind
  HeadAlignment head_alignment = HeadAlignment::adaptive_heads;

  AdamWOptions adamw;
  double base_lr = 1e-4;
  size_t batch_size = 16;
  size_t epochs = 10;
  size_t steps_per_epoch = 10;
  size_t warmup_steps = 20;
  size_t holdout_count = 16;
  uint64_t seed = 1;

  // Seeded training-time augmentation: horizontal flips and random resized
  // crops. The crop scale range is not standardized anywhere; [0.5, 1.0] is
  // the documented default here. Held-out evaluation never augments.
  bool augment_flip = false;
  bool augment_crop = false;
  double crop_scale_min = 0.5;
  double crop_scale_max = 1.0;

  double selection_s = 0.09;
  bool selection_half_only = true;
  size_t selection_sample = 8;  // images used when selecting the target layer

  void validate(const ModelConfig& teacher) const;
  nlohmann::json to_json() const;
  static DistillPlan from_json(const nlohmann::json& j);
};

struct DistillLog {
  size_t target_layer = 0;                     // resolved 1-based teacher layer
  std::vector<double> per_step_loss;           // epochs * steps_per_epoch entries
  std::vector<double> per_epoch_holdout_kl;    // epochs + 1 entries, [0] = before training
  std::vector<double> per_epoch_student_nmi;   // epochs + 1 entries, distilled-layer NMI

  void validate(size_t epochs, size_t steps_per_epoch) const;
  std::string serialize() const;
  static DistillLog parse(const std::string& text);
};

/// Mean over heads of row-averaged KL(teacher || student) on probability
/// matrices. Teacher and student probabilities are floored at 1e-12 inside
/// their logs; rows where the teacher puts zero mass contribute zero.
/// Head-count mismatch is an error pointing at align_student_heads.
double attention_kl_loss(const std::vector<ArrayD>& teacher_heads,
                         const std::vector<ArrayD>& student_heads, double tol = 1e-6);

/// Token-averaged (1 - cosine) between L2-normalized feature rows. The
/// student side is expected to already carry the learned projection to the
/// teacher width.
double feature_cosine_loss(const ArrayD& teacher_features, const ArrayD& student_projected);

/// Head-count alignment: the last student layer adopts the teacher's head
/// count with head_dim = dim / teacher_heads; other layers are untouched.
/// No-op when the counts already match.
ModelConfig align_student_heads(const ModelConfig& student, size_t teacher_heads);

/// Reverts align_student_heads (and drops any extra alignment layer flag).
ModelConfig restore_student_heads(const ModelConfig& student);

/// Concatenates per-layer head lists into one target with sum-of-heads
/// entries, in listed-layer order. All layers must share the token count.
std::vector<ArrayD> concat_multilayer_targets(const std::vector<std::vector<ArrayD>>& layers);

template <typename T>
struct DistillResult {
  ParamMap<T> student_params;
  ModelConfig student_config;  // head-aligned config used during the run
  DistillLog log;
};

/// End-to-end distillation at desk scale. Deterministic for a fixed plan
/// seed; the teacher is never modified. Throws NumericError with the step
/// index if the loss diverges. With zero epochs the student parameters equal
/// their initialization and the per-epoch log is empty.
template <typename T>
DistillResult<T> run_distillation(const ModelConfig& teacher_config,
                                  const ParamMap<T>& teacher_params,
                                  const ModelConfig& student_config,
                                  const std::vector<Array<T>>& corpus, const DistillPlan& plan,
                                  const ParamMap<T>* initial_student = nullptr);

extern template DistillResult<float> run_distillation<float>(
    const ModelConfig&, const ParamMap<float>&, const ModelConfig&,
    const std::vector<Array<float>>&, const DistillPlan&, const ParamMap<float>*);
extern template DistillResult<double> run_distillation<double>(
    const ModelConfig&, const ParamMap<double>&, const ModelConfig&,
    const std::vector<Array<double>>&, const DistillPlan&, const ParamMap<double>*);

}  // namespace attnkit

#endif  // ATTNKIT_DISTILL_HPP
