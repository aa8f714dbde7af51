// SPDX-License-Identifier: Apache-2.0
#include "attnkit/distill.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace attnkit {

using nlohmann::json;

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::attention_kl: return "attention_kl";
    case LossKind::feature_cosine: return "feature_cosine";
    case LossKind::attention_kl_multilayer: return "attention_kl_multilayer";
  }
  throw NumericError("unreachable loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "attention_kl") return LossKind::attention_kl;
  if (name == "feature_cosine") return LossKind::feature_cosine;
  if (name == "attention_kl_multilayer") return LossKind::attention_kl_multilayer;
  throw CodecError("unknown loss kind '" + name + "'");
}

std::string head_alignment_name(HeadAlignment a) {
  return a == HeadAlignment::adaptive_heads ? "adaptive_heads" : "extra_attention_layer";
}

HeadAlignment head_alignment_from_name(const std::string& name) {
  if (name == "adaptive_heads") return HeadAlignment::adaptive_heads;
  if (name == "extra_attention_layer") return HeadAlignment::extra_attention_layer;
  throw CodecError("unknown head alignment '" + name + "'");
}

void DistillPlan::validate(const ModelConfig& teacher) const {
  if (teacher_target_layer > teacher.depth)
    throw NumericError("plan: target layer beyond teacher depth");
  bool is_multi = loss_kind == LossKind::attention_kl_multilayer;
  if (is_multi == multilayer_targets.empty())
    throw NumericError("plan: multilayer target list must be nonempty exactly for the "
                       "multilayer loss kind");
  for (size_t l : multilayer_targets)
    if (l < 1 || l > teacher.depth) throw NumericError("plan: multilayer target out of range");
  if (batch_size < 1) throw NumericError("plan: batch size must be >= 1");
  if (epochs > 0 && steps_per_epoch < 1)
    throw NumericError("plan: steps_per_epoch must be >= 1");
  if (epochs > 0 && holdout_count < 1)
    throw NumericError("plan: holdout_count must be >= 1 when training");
  if (epochs > 0 && warmup_steps >= epochs * steps_per_epoch)
    throw NumericError("plan: warmup must end before the last step");
  if (!(selection_s > 0.0 && selection_s < 1.0)) throw NumericError("plan: s must be in (0, 1)");
  if (augment_crop &&
      !(crop_scale_min > 0.0 && crop_scale_min <= crop_scale_max && crop_scale_max <= 1.0))
    throw NumericError("plan: crop scale range must satisfy 0 < min <= max <= 1");
}

json DistillPlan::to_json() const {
  return json{{"teacher_target_layer", teacher_target_layer},
              {"loss", loss_kind_name(loss_kind)},
              {"multilayer_targets", multilayer_targets},
              {"head_alignment", head_alignment_name(head_alignment)},
              {"optimizer",
               {{"beta1", adamw.beta1},
                {"beta2", adamw.beta2},
                {"weight_decay", adamw.weight_decay},
                {"eps", adamw.eps}}},
              {"base_lr", base_lr},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"steps_per_epoch", steps_per_epoch},
              {"warmup_steps", warmup_steps},
              {"holdout_count", holdout_count},
              {"seed", seed},
              {"augment",
               {{"flip", augment_flip},
                {"crop", augment_crop},
                {"crop_scale_min", crop_scale_min},
                {"crop_scale_max", crop_scale_max}}},
              {"selection", {{"s", selection_s},
                             {"half_only", selection_half_only},
                             {"sample", selection_sample}}}};
}

DistillPlan DistillPlan::from_json(const json& j) {
  DistillPlan p;
  p.teacher_target_layer = j.value("teacher_target_layer", size_t(0));
  p.loss_kind = loss_kind_from_name(j.value("loss", "attention_kl"));
  p.multilayer_targets = j.value("multilayer_targets", std::vector<size_t>{});
  p.head_alignment = head_alignment_from_name(j.value("head_alignment", "adaptive_heads"));
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    p.adamw.beta1 = o.value("beta1", 0.9);
    p.adamw.beta2 = o.value("beta2", 0.95);
    p.adamw.weight_decay = o.value("weight_decay", 0.05);
    p.adamw.eps = o.value("eps", 1e-8);
  }
  p.base_lr = j.value("base_lr", 1e-4);
  p.batch_size = j.value("batch_size", size_t(16));
  p.epochs = j.value("epochs", size_t(10));
  p.steps_per_epoch = j.value("steps_per_epoch", size_t(10));
  p.warmup_steps = j.value("warmup_steps", size_t(20));
  p.holdout_count = j.value("holdout_count", size_t(16));
  p.seed = j.value("seed", uint64_t(1));
  if (j.contains("augment")) {
    const json& a = j["augment"];
    p.augment_flip = a.value("flip", false);
    p.augment_crop = a.value("crop", false);
    p.crop_scale_min = a.value("crop_scale_min", 0.5);
    p.crop_scale_max = a.value("crop_scale_max", 1.0);
  }
  if (j.contains("selection")) {
    const json& s = j["selection"];
    p.selection_s = s.value("s", 0.09);
    p.selection_half_only = s.value("half_only", true);
    p.selection_sample = s.value("sample", size_t(8));
  }
  return p;
}

void DistillLog::validate(size_t epochs, size_t steps_per_epoch) const {
  if (per_step_loss.size() != epochs * steps_per_epoch)
    throw NumericError("distill log: step count mismatch");
  size_t expected = epochs == 0 ? 0 : epochs + 1;
  if (per_epoch_holdout_kl.size() != expected || per_epoch_student_nmi.size() != expected)
    throw NumericError("distill log: epoch count mismatch");
}

std::string DistillLog::serialize() const {
  std::string out;
  out += json{{"target_layer", target_layer}}.dump();
  out += '\n';
  for (size_t i = 0; i < per_step_loss.size(); ++i) {
    out += json{{"step", i}, {"loss", per_step_loss[i]}}.dump();
    out += '\n';
  }
  for (size_t e = 0; e < per_epoch_holdout_kl.size(); ++e) {
    out += json{{"epoch", e},
                {"holdout_kl", per_epoch_holdout_kl[e]},
                {"student_nmi", per_epoch_student_nmi[e]}}
               .dump();
    out += '\n';
  }
  return out;
}

DistillLog DistillLog::parse(const std::string& text) {
  DistillLog log;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw CodecError("distill log line " + std::to_string(line_no) + ": invalid JSON");
    if (j.contains("target_layer")) log.target_layer = j["target_layer"].get<size_t>();
    else if (j.contains("step")) log.per_step_loss.push_back(j.at("loss").get<double>());
    else if (j.contains("epoch")) {
      log.per_epoch_holdout_kl.push_back(j.at("holdout_kl").get<double>());
      log.per_epoch_student_nmi.push_back(j.at("student_nmi").get<double>());
    } else {
      throw CodecError("distill log line " + std::to_string(line_no) + ": unknown entry");
    }
  }
  return log;
}

namespace {

void check_stochastic_rows(const ArrayD& a, double tol, const char* who) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw NumericError(std::string(who) + ": attention matrix must be square");
  const size_t n = a.dim(0);
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      double v = a.data[i * n + j];
      if (!std::isfinite(v) || v < -tol)
        throw NumericError(std::string(who) + ": negative attention entry");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > tol)
      throw NumericError(std::string(who) + ": attention row not stochastic");
  }
}

}  // namespace

double attention_kl_loss(const std::vector<ArrayD>& teacher_heads,
                         const std::vector<ArrayD>& student_heads, double tol) {
  if (teacher_heads.size() != student_heads.size())
    throw NumericError("attention_kl_loss: head counts differ (" +
                       std::to_string(teacher_heads.size()) + " vs " +
                       std::to_string(student_heads.size()) +
                       "); align_student_heads first");
  if (teacher_heads.empty()) throw NumericError("attention_kl_loss: no heads");
  const size_t n = teacher_heads[0].dim(0);
  double total = 0.0;
  for (size_t m = 0; m < teacher_heads.size(); ++m) {
    const ArrayD& t = teacher_heads[m];
    const ArrayD& s = student_heads[m];
    if (s.dim(0) != n || t.dim(0) != n)
      throw NumericError("attention_kl_loss: token counts differ");
    check_stochastic_rows(t, tol, "teacher");
    check_stochastic_rows(s, tol, "student");
    double head_sum = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) {
        double tv = t.data[i * n + j];
        if (tv > 0.0)
          head_sum += tv * (std::log(std::max(tv, 1e-12)) -
                            std::log(std::max(s.data[i * n + j], 1e-12)));
      }
    total += head_sum / static_cast<double>(n);
  }
  return total / static_cast<double>(teacher_heads.size());
}

double feature_cosine_loss(const ArrayD& teacher_features, const ArrayD& student_projected) {
  if (teacher_features.shape != student_projected.shape)
    throw NumericError("feature_cosine_loss: shape mismatch");
  const size_t n = teacher_features.dim(0), d = teacher_features.dim(1);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double nt = 0.0, ns = 0.0, dot = 0.0;
    for (size_t j = 0; j < d; ++j) {
      double t = teacher_features.data[i * d + j];
      double s = student_projected.data[i * d + j];
      nt += t * t;
      ns += s * s;
      dot += t * s;
    }
    if (nt <= 0.0 || ns <= 0.0)
      throw NumericError("feature_cosine_loss: zero-norm token vector at row " +
                         std::to_string(i));
    total += 1.0 - dot / (std::sqrt(nt) * std::sqrt(ns));
  }
  return total / static_cast<double>(n);
}

ModelConfig align_student_heads(const ModelConfig& student, size_t teacher_heads) {
  if (teacher_heads == 0) throw NumericError("align_student_heads: zero teacher heads");
  if (student.dim % teacher_heads != 0)
    throw NumericError("align_student_heads: student dim " + std::to_string(student.dim) +
                       " not divisible by teacher head count " + std::to_string(teacher_heads));
  ModelConfig out = student;
  if (teacher_heads == student.heads) return out;
  out.last_layer_heads = teacher_heads;
  return out;
}

ModelConfig restore_student_heads(const ModelConfig& student) {
  ModelConfig out = student;
  out.last_layer_heads = 0;
  out.extra_attention_layer = false;
  out.extra_layer_heads = 0;
  return out;
}

std::vector<ArrayD> concat_multilayer_targets(const std::vector<std::vector<ArrayD>>& layers) {
  if (layers.empty()) throw NumericError("concat_multilayer_targets: no layers");
  const size_t n = layers[0].empty() ? 0 : layers[0][0].dim(0);
  std::vector<ArrayD> out;
  for (const auto& layer : layers) {
    for (const auto& head : layer) {
      if (head.dim(0) != n)
        throw NumericError("concat_multilayer_targets: token counts differ across layers");
      out.push_back(head);
    }
  }
  if (out.empty()) throw NumericError("concat_multilayer_targets: no heads");
  return out;
}

namespace {

template <typename T>
ArrayD to_double(const Array<T>& a) {
  ArrayD out = ArrayD::zeros(a.shape);
  for (size_t i = 0; i < a.numel(); ++i) out.data[i] = static_cast<double>(a.data[i]);
  return out;
}

template <typename T>
Array<T> flip_horizontal(const Array<T>& image) {
  const size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Array<T> out = Array<T>::zeros(image.shape);
  for (size_t y = 0; y < h; ++y)
    for (size_t x = 0; x < w; ++x)
      for (size_t ch = 0; ch < c; ++ch)
        out.data[(y * w + x) * c + ch] = image.data[(y * w + (w - 1 - x)) * c + ch];
  return out;
}

// Crop a window and resize it back to the full frame (corner-aligned
// bilinear), the random-resized-crop primitive.
template <typename T>
Array<T> crop_resize(const Array<T>& image, size_t y0, size_t x0, size_t crop_h,
                     size_t crop_w) {
  const size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Array<T> out = Array<T>::zeros(image.shape);
  auto src_coord = [](size_t dst, size_t out_n, size_t in_n) {
    if (out_n <= 1 || in_n <= 1) return 0.0;
    return static_cast<double>(dst) * static_cast<double>(in_n - 1) /
           static_cast<double>(out_n - 1);
  };
  for (size_t y = 0; y < h; ++y) {
    double sy = src_coord(y, h, crop_h);
    size_t iy0 = static_cast<size_t>(sy);
    size_t iy1 = std::min(iy0 + 1, crop_h - 1);
    double fy = sy - static_cast<double>(iy0);
    for (size_t x = 0; x < w; ++x) {
      double sx = src_coord(x, w, crop_w);
      size_t ix0 = static_cast<size_t>(sx);
      size_t ix1 = std::min(ix0 + 1, crop_w - 1);
      double fx = sx - static_cast<double>(ix0);
      for (size_t ch = 0; ch < c; ++ch) {
        auto at = [&](size_t yy, size_t xx) {
          return static_cast<double>(image.data[((y0 + yy) * w + (x0 + xx)) * c + ch]);
        };
        double v = (1 - fy) * ((1 - fx) * at(iy0, ix0) + fx * at(iy0, ix1)) +
                   fy * ((1 - fx) * at(iy1, ix0) + fx * at(iy1, ix1));
        out.data[(y * w + x) * c + ch] = static_cast<T>(v);
      }
    }
  }
  return out;
}

// Frozen-teacher targets are memoized per corpus index; the teacher never
// changes during a run, so this is purely a speedup.
template <typename T>
struct TeacherCache {
  const ModelConfig& config;
  const ParamMap<T>& params;
  std::vector<size_t> target_layers;  // 1-based
  bool want_features = false;
  std::vector<std::vector<Array<T>>> attn;  // concatenated target heads per image
  std::vector<Array<T>> feat;               // target-layer features per image
  std::vector<bool> ready;

  TeacherCache(const ModelConfig& c, const ParamMap<T>& p, std::vector<size_t> layers,
               bool features, size_t corpus_size)
      : config(c), params(p), target_layers(std::move(layers)), want_features(features) {
    attn.resize(corpus_size);
    feat.resize(corpus_size);
    ready.assign(corpus_size, false);
  }

  // Targets for an arbitrary view (used directly when augmentation makes
  // caching by corpus index meaningless).
  std::pair<std::vector<Array<T>>, Array<T>> compute(const Array<T>& image) const {
    ForwardOutput<T> fwd = forward_model(config, params, image);
    std::vector<Array<T>> heads;
    Array<T> features;
    if (want_features) {
      features = fwd.layer_features[target_layers[0] - 1];
    } else {
      for (size_t l : target_layers)
        for (const auto& h : fwd.attention[l - 1]) heads.push_back(h);
    }
    return {std::move(heads), std::move(features)};
  }

  void ensure(size_t index, const Array<T>& image) {
    if (ready[index]) return;
    auto [heads, features] = compute(image);
    attn[index] = std::move(heads);
    feat[index] = std::move(features);
    ready[index] = true;
  }
};

}  // namespace

template <typename T>
DistillResult<T> run_distillation(const ModelConfig& teacher_config,
                                  const ParamMap<T>& teacher_params,
                                  const ModelConfig& student_config,
                                  const std::vector<Array<T>>& corpus, const DistillPlan& plan,
                                  const ParamMap<T>* initial_student) {
  teacher_config.validate();
  student_config.validate();
  plan.validate(teacher_config);
  if (corpus.size() <= plan.holdout_count)
    throw NumericError("run_distillation: corpus not larger than holdout");
  const size_t train_count = corpus.size() - plan.holdout_count;

  // Resolve the teacher target layer(s).
  bool is_multi = plan.loss_kind == LossKind::attention_kl_multilayer;
  bool is_feature = plan.loss_kind == LossKind::feature_cosine;
  std::vector<size_t> target_layers;
  if (is_multi) {
    target_layers = plan.multilayer_targets;
  } else if (plan.teacher_target_layer != 0) {
    target_layers = {plan.teacher_target_layer};
  } else {
    size_t sample = std::min(plan.selection_sample, train_count);
    if (sample == 0) throw NumericError("run_distillation: no images for layer selection");
    std::vector<AttentionStack> stacks;
    for (size_t i = 0; i < sample; ++i)
      stacks.push_back(to_attention_stack(forward_model(teacher_config, teacher_params,
                                                        corpus[i])));
    target_layers = {select_target_layer(dataset_nmi(stacks), plan.selection_s,
                                         plan.selection_half_only)};
  }

  // Head alignment. Feature distillation works on features and needs none.
  size_t target_heads = teacher_config.heads * target_layers.size();
  ModelConfig student = student_config;
  if (!is_feature) {
    if (plan.head_alignment == HeadAlignment::adaptive_heads) {
      student = align_student_heads(student, target_heads);
    } else {
      student.extra_attention_layer = true;
      student.extra_layer_heads = target_heads;
      if (student.dim % target_heads != 0)
        throw NumericError("run_distillation: student dim not divisible by target heads");
    }
  }

  ParamMap<T> params =
      initial_student ? *initial_student : init_params<T>(student, plan.seed);
  if (initial_student && student.extra_attention_layer) {
    // The alignment layer is always fresh; initial weights never carry it.
    ParamMap<T> fresh = init_params<T>(student, plan.seed);
    for (auto& [name, a] : fresh)
      if (name.starts_with("extra_attn.") && !params.count(name))
        params.emplace(name, std::move(a));
  }
  if (is_feature && !params.count("distill_proj.weight")) {
    Rng proj_rng(plan.seed + 2);
    Array<T> w = Array<T>::zeros({teacher_config.dim, student.dim});
    for (T& v : w.data) v = static_cast<T>(proj_rng.trunc_normal(0.02));
    params.emplace("distill_proj.weight", std::move(w));
    params.emplace("distill_proj.bias", Array<T>::zeros({teacher_config.dim}));
  }

  TeacherCache<T> teacher(teacher_config, teacher_params, target_layers, is_feature,
                          corpus.size());

  // Pulls the model parameters (not the projection) for graph construction.
  auto model_params_view = [&]() {
    ParamMap<T> view;
    for (const auto& [name, a] : params)
      if (!name.starts_with("distill_proj.")) view.emplace(name, a);
    return view;
  };

  auto student_heads_of = [&](const ForwardOutput<T>& fwd) -> const std::vector<Array<T>>& {
    if (plan.head_alignment == HeadAlignment::extra_attention_layer && !is_feature)
      return fwd.extra[0];
    return fwd.attention.back();
  };

  // Held-out metrics: mean distillation loss and distilled-layer NMI.
  auto evaluate_holdout = [&]() -> std::pair<double, double> {
    ParamMap<T> view = model_params_view();
    double loss_sum = 0.0, nmi_sum = 0.0;
    for (size_t i = train_count; i < corpus.size(); ++i) {
      teacher.ensure(i, corpus[i]);
      ForwardOutput<T> fwd = forward_model(student, view, corpus[i]);
      if (is_feature) {
        const Array<T>& sf = fwd.layer_features.back();
        ArrayD proj = matmul_nt(to_double(sf), to_double(params.at("distill_proj.weight")));
        const Array<T>& bias = params.at("distill_proj.bias");
        for (size_t r = 0; r < proj.dim(0); ++r)
          for (size_t c = 0; c < proj.dim(1); ++c)
            proj.data[r * proj.dim(1) + c] += static_cast<double>(bias.data[c]);
        loss_sum += feature_cosine_loss(to_double(teacher.feat[i]), proj);
        std::vector<ArrayD> heads;
        for (const auto& h : fwd.attention.back()) heads.push_back(to_double(h));
        nmi_sum += nmi_layer(heads);
      } else {
        std::vector<ArrayD> t_heads, s_heads;
        for (const auto& h : teacher.attn[i]) t_heads.push_back(to_double(h));
        for (const auto& h : student_heads_of(fwd)) s_heads.push_back(to_double(h));
        loss_sum += attention_kl_loss(t_heads, s_heads);
        nmi_sum += nmi_layer(s_heads);
      }
    }
    double k = static_cast<double>(plan.holdout_count);
    return {loss_sum / k, nmi_sum / k};
  };

  DistillLog log;
  log.target_layer = target_layers[0];
  const size_t total_steps = plan.epochs * plan.steps_per_epoch;
  LrSchedule schedule{plan.base_lr, plan.batch_size, plan.warmup_steps,
                      total_steps == 0 ? 1 : total_steps};
  AdamWState<T> opt_state;
  opt_state.options = plan.adamw;
  Rng sampler(plan.seed + 1);

  if (plan.epochs > 0) {
    auto [kl0, nmi0] = evaluate_holdout();
    log.per_epoch_holdout_kl.push_back(kl0);
    log.per_epoch_student_nmi.push_back(nmi0);
  }

  for (size_t step = 0; step < total_steps; ++step) {
    Graph<T> g;
    ParamMap<T> view = model_params_view();
    auto pid = make_param_nodes(g, view, student, /*needs_grad=*/true);
    int proj_w = -1, proj_b = -1;
    if (is_feature) {
      proj_w = g.input(params.at("distill_proj.weight"), true);
      proj_b = g.input(params.at("distill_proj.bias"), true);
    }

    const bool augmented = plan.augment_flip || plan.augment_crop;
    std::vector<int> image_losses;
    for (size_t b = 0; b < plan.batch_size; ++b) {
      size_t idx = static_cast<size_t>(sampler.below(train_count));
      Array<T> view = corpus[idx];
      if (plan.augment_crop) {
        double area = sampler.uniform(plan.crop_scale_min, plan.crop_scale_max);
        double side = std::sqrt(area);
        size_t crop_h = std::max<size_t>(
            student.patch, static_cast<size_t>(std::llround(side * student.image_h)));
        size_t crop_w = std::max<size_t>(
            student.patch, static_cast<size_t>(std::llround(side * student.image_w)));
        crop_h = std::min(crop_h, student.image_h);
        crop_w = std::min(crop_w, student.image_w);
        size_t y0 = static_cast<size_t>(sampler.below(student.image_h - crop_h + 1));
        size_t x0 = static_cast<size_t>(sampler.below(student.image_w - crop_w + 1));
        view = crop_resize(view, y0, x0, crop_h, crop_w);
      }
      if (plan.augment_flip && sampler.below(2) == 1) view = flip_horizontal(view);

      // Teacher and student see the same view; cached targets only apply to
      // the un-augmented corpus image.
      std::vector<Array<T>> view_attn;
      Array<T> view_feat;
      const std::vector<Array<T>>* target_attn = nullptr;
      const Array<T>* target_feat = nullptr;
      if (augmented) {
        auto computed = teacher.compute(view);
        view_attn = std::move(computed.first);
        view_feat = std::move(computed.second);
        target_attn = &view_attn;
        target_feat = &view_feat;
      } else {
        teacher.ensure(idx, corpus[idx]);
        target_attn = &teacher.attn[idx];
        target_feat = &teacher.feat[idx];
      }

      int tokens = g.constant(patchify(view, student));
      ForwardNodes<T> fwd = forward_graph(g, student, pid, tokens);
      if (is_feature) {
        int proj = g.linear(fwd.layer_features.back(), proj_w, proj_b);
        image_losses.push_back(g.cosine_distance_rows(proj, g.constant(*target_feat)));
      } else {
        const std::vector<int>& score_ids =
            plan.head_alignment == HeadAlignment::extra_attention_layer
                ? fwd.extra_scores
                : fwd.attention_scores.back();
        if (score_ids.size() != target_attn->size())
          throw NumericError("run_distillation: aligned head count mismatch");
        std::vector<int> head_losses;
        for (size_t m = 0; m < score_ids.size(); ++m)
          head_losses.push_back(
              g.kl_vs_target_rows(score_ids[m], g.constant((*target_attn)[m])));
        image_losses.push_back(g.mean_scalars(head_losses));
      }
    }
    int loss = g.mean_scalars(image_losses);
    double loss_value = static_cast<double>(g.value(loss).data[0]);
    if (!std::isfinite(loss_value))
      throw NumericError("run_distillation: loss diverged at step " + std::to_string(step));
    g.backward(loss);

    ParamMap<T> grads;
    for (const auto& [name, id] : pid) grads.emplace(name, g.grad(id));
    if (is_feature) {
      grads.emplace("distill_proj.weight", g.grad(proj_w));
      grads.emplace("distill_proj.bias", g.grad(proj_b));
    }
    adamw_step(params, grads, opt_state, lr_at(step, schedule));
    log.per_step_loss.push_back(loss_value);

    if ((step + 1) % plan.steps_per_epoch == 0) {
      auto [kl, nmi] = evaluate_holdout();
      log.per_epoch_holdout_kl.push_back(kl);
      log.per_epoch_student_nmi.push_back(nmi);
    }
  }

  log.validate(plan.epochs, plan.steps_per_epoch);
  return DistillResult<T>{std::move(params), student, std::move(log)};
}

template DistillResult<float> run_distillation<float>(const ModelConfig&,
                                                      const ParamMap<float>&,
                                                      const ModelConfig&,
                                                      const std::vector<Array<float>>&,
                                                      const DistillPlan&,
                                                      const ParamMap<float>*);
template DistillResult<double> run_distillation<double>(const ModelConfig&,
                                                        const ParamMap<double>&,
                                                        const ModelConfig&,
                                                        const std::vector<Array<double>>&,
                                                        const DistillPlan&,
                                                        const ParamMap<double>*);

}  // namespace attnkit
