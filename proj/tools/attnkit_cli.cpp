// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Subcommands: nmi, select-layer, cka, distill,
// probe, curate, report. Every output is written atomically and is
// byte-identical for identical inputs and seed. Exit codes: 0 success,
// 2 usage, 3 malformed data, 4 numeric/degenerate failure.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "attnkit/cka.hpp"
#include "attnkit/codecs.hpp"
#include "attnkit/curation.hpp"
#include "attnkit/distill.hpp"
#include "attnkit/image.hpp"
#include "attnkit/manifest.hpp"
#include "attnkit/nmi.hpp"
#include "attnkit/probe.hpp"
#include "attnkit/synthetic.hpp"

using namespace attnkit;
using nlohmann::json;

namespace {

uint64_t default_seed() {
  if (const char* env = std::getenv("ATTNKIT_SEED")) return std::strtoull(env, nullptr, 10);
  return 1234;
}

// "synthetic-shapes:COUNTxHxW:SEED" or a manifest path.
bool is_synthetic_corpus(const std::string& spec) {
  return spec.rfind("synthetic-shapes:", 0) == 0;
}

ShapesCorpusSpec parse_synthetic_spec(const std::string& spec) {
  ShapesCorpusSpec out;
  size_t first = spec.find(':');
  size_t second = spec.find(':', first + 1);
  std::string dims = spec.substr(first + 1, second == std::string::npos
                                                 ? std::string::npos
                                                 : second - first - 1);
  unsigned count = 0, h = 0, w = 0;
  if (std::sscanf(dims.c_str(), "%ux%ux%u", &count, &h, &w) != 3)
    throw CodecError("synthetic corpus spec must look like synthetic-shapes:COUNTxHxW[:SEED]");
  out.count = count;
  out.image_h = h;
  out.image_w = w;
  out.seed = second == std::string::npos ? default_seed()
                                         : std::strtoull(spec.c_str() + second + 1, nullptr, 10);
  return out;
}

ArrayD load_image_array(const std::string& path, size_t channels) {
  Image img = read_raster(path);
  ArrayD raw = image_to_array(img);
  if (img.channels == channels) return raw;
  if (img.channels == 1 && channels == 3) {
    ArrayD out = ArrayD::zeros({img.height, img.width, 3});
    for (size_t p = 0; p < img.height * img.width; ++p)
      for (size_t c = 0; c < 3; ++c) out.data[p * 3 + c] = raw.data[p];
    return out;
  }
  throw CodecError("image '" + path + "' has " + std::to_string(img.channels) +
                   " channels, model expects " + std::to_string(channels));
}

std::vector<SegSample> load_seg_corpus(const std::string& corpus_spec, size_t channels) {
  if (is_synthetic_corpus(corpus_spec))
    return make_shapes_corpus(parse_synthetic_spec(corpus_spec));
  CorpusManifest manifest = read_manifest(corpus_spec);
  std::vector<SegSample> out;
  for (const auto& record : manifest.records) {
    SegSample sample;
    sample.image = load_image_array(record.path, channels);
    Image labels = read_raster(record.path + ".labels.pgm");
    if (labels.channels != 1)
      throw CodecError("label map '" + record.path + ".labels.pgm' must be single-channel");
    sample.labels = Array<int>::zeros({labels.height, labels.width});
    for (size_t i = 0; i < labels.pixels.size(); ++i)
      sample.labels.data[i] = labels.pixels[i];
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<Array<float>> load_train_corpus(const std::string& corpus_spec, size_t channels) {
  if (is_synthetic_corpus(corpus_spec))
    return corpus_images<float>(make_shapes_corpus(parse_synthetic_spec(corpus_spec)));
  CorpusManifest manifest = read_manifest(corpus_spec);
  std::vector<Array<float>> out;
  for (const auto& record : manifest.records) {
    ArrayD img = load_image_array(record.path, channels);
    Array<float> f = Array<float>::zeros(img.shape);
    for (size_t i = 0; i < img.numel(); ++i) f.data[i] = static_cast<float>(img.data[i]);
    out.push_back(std::move(f));
  }
  return out;
}


// ---- subcommand bodies ----

int run_nmi(const std::vector<std::string>& inputs, const std::string& ckpt,
            const std::string& corpus, size_t sample, double s, bool half_only, size_t grid_h,
            size_t grid_w, const std::string& dump_dir, const std::string& features_dir,
            const std::string& embeddings_out, const std::string& out) {
  std::vector<AttentionStack> stacks;
  if (!ckpt.empty()) {
    Checkpoint loaded = read_checkpoint(ckpt);
    ModelConfig config = ModelConfig::from_json(loaded.config.at("model"));
    ParamMap<float> params = params_from_tensors<float>(loaded.params);
    auto images = load_train_corpus(corpus, config.channels);
    size_t n = sample == 0 ? images.size() : std::min(sample, images.size());
    std::vector<float> embeddings;  // mean-pooled last-layer features per image
    for (size_t i = 0; i < n; ++i) {
      ForwardOutput<float> fwd = forward_model(config, params, images[i]);
      stacks.push_back(to_attention_stack(fwd));
      if (!dump_dir.empty()) {
        std::filesystem::create_directories(dump_dir);
        write_attention_dump(stacks.back(),
                             dump_dir + "/image_" + std::to_string(i) + ".atn");
      }
      if (!features_dir.empty()) {
        std::filesystem::create_directories(features_dir);
        write_feature_dump(to_feature_stack(fwd),
                           features_dir + "/image_" + std::to_string(i) + ".fet");
      }
      if (!embeddings_out.empty()) {
        const Array<float>& last = fwd.layer_features.back();
        for (size_t d = 0; d < config.dim; ++d) {
          float acc = 0.0f;
          for (size_t t = 0; t < config.tokens(); ++t) acc += last.data[t * config.dim + d];
          embeddings.push_back(acc / static_cast<float>(config.tokens()));
        }
      }
    }
    if (!embeddings_out.empty()) {
      FeatureStack emb;
      emb.layers = 1;
      emb.tokens = n;
      emb.dim = config.dim;
      emb.data = Tensor({1, n, config.dim}, std::move(embeddings));
      write_feature_dump(emb, embeddings_out);
    }
    if (grid_h == 0) {
      grid_h = config.grid_h();
      grid_w = config.grid_w();
    }
  } else {
    for (const auto& path : inputs) stacks.push_back(read_attention_dump(path));
  }
  if (stacks.empty()) throw NumericError("nmi: no attention inputs");
  if (grid_h == 0) {
    size_t n = stacks[0].tokens;
    size_t root = static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (root * root != n)
      throw NumericError("nmi: token count is not square; pass --grid-h/--grid-w");
    grid_h = grid_w = root;
  }
  NmiReport report = build_nmi_report(stacks, grid_h, grid_w, s, half_only);
  std::string text = serialize_nmi_report(report);
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text_atomic(out, text);
  return 0;
}

int run_select_layer(const std::string& report_path, const std::string& values_path, double s,
                     bool half_only, const std::string& out) {
  std::vector<double> nmi;
  if (!values_path.empty()) {
    json values = json::parse(read_text(values_path), nullptr, false);
    if (values.is_discarded() || !values.is_array())
      throw CodecError("select-layer: values file must be a JSON array");
    nmi = values.get<std::vector<double>>();
  } else {
    NmiReport report = parse_nmi_report(read_text(report_path));
    nmi = report.per_layer_nmi;
  }
  size_t target = select_target_layer(nmi, s, half_only);
  json result = {{"target_layer", target}, {"s", s}, {"half_only", half_only}};
  json deltas = json::array();
  for (double v : nmi) deltas.push_back(-std::fabs(v - s));
  result["delta_nmi"] = deltas;
  std::string text = result.dump() + "\n";
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text_atomic(out, text);
  return 0;
}

int run_cka(const std::vector<std::string>& a_paths, const std::vector<std::string>& b_paths,
            bool per_image, const std::string& out) {
  auto load_side = [&](const std::vector<std::string>& paths) {
    std::vector<FeatureStack> stacks;
    for (const auto& p : paths) stacks.push_back(read_feature_dump(p));
    return stacks;
  };
  auto a_stacks = load_side(a_paths);
  auto b_stacks = load_side(b_paths);
  if (a_stacks.empty() || b_stacks.empty()) throw NumericError("cka: missing inputs");
  const size_t layers_a = a_stacks[0].layers, layers_b = b_stacks[0].layers;

  auto pooled = [](const std::vector<FeatureStack>& stacks, size_t layer) {
    size_t total = 0;
    for (const auto& s : stacks) total += s.tokens;
    ArrayD out_m = ArrayD::zeros({total, stacks[0].dim});
    size_t row = 0;
    for (const auto& s : stacks) {
      ArrayD f = s.layer(layer);
      for (size_t i = 0; i < s.tokens; ++i, ++row)
        for (size_t d = 0; d < s.dim; ++d) out_m.data[row * s.dim + d] = f.data[i * s.dim + d];
    }
    return out_m;
  };

  ArrayD grid = ArrayD::zeros({layers_a, layers_b});
  if (per_image) {
    if (a_stacks.size() != b_stacks.size())
      throw NumericError("cka: per-image mode needs matching dump counts");
    for (size_t i = 0; i < layers_a; ++i)
      for (size_t j = 0; j < layers_b; ++j) {
        double acc = 0.0;
        for (size_t img = 0; img < a_stacks.size(); ++img)
          acc += linear_cka(a_stacks[img].layer(i), b_stacks[img].layer(j)).value;
        grid.data[i * layers_b + j] = acc / static_cast<double>(a_stacks.size());
      }
  } else {
    std::vector<ArrayD> a_layers, b_layers;
    for (size_t i = 0; i < layers_a; ++i) a_layers.push_back(pooled(a_stacks, i));
    for (size_t j = 0; j < layers_b; ++j) b_layers.push_back(pooled(b_stacks, j));
    grid = cka_grid(a_layers, b_layers);
  }

  json result = {{"layers_a", layers_a}, {"layers_b", layers_b},
                 {"mode", per_image ? "per_image" : "pooled"}};
  json rows = json::array();
  for (size_t i = 0; i < layers_a; ++i) {
    json row = json::array();
    for (size_t j = 0; j < layers_b; ++j) row.push_back(grid.data[i * layers_b + j]);
    rows.push_back(row);
  }
  result["grid"] = rows;
  std::string text = result.dump() + "\n";
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text_atomic(out, text);
  return 0;
}

int run_distill(const std::string& plan_path, const std::string& corpus_spec,
                const std::string& out, const std::string& log_path) {
  json plan_file = json::parse(read_text(plan_path), nullptr, false);
  if (plan_file.is_discarded()) throw CodecError("distill: plan file is not valid JSON");

  ModelConfig student_config = ModelConfig::from_json(plan_file.at("student"));
  DistillPlan plan = plan_file.contains("plan") ? DistillPlan::from_json(plan_file["plan"])
                                                : DistillPlan{};
  // A previously computed analysis report can pin the target layer.
  if (plan.teacher_target_layer == 0 && plan_file.contains("nmi_report")) {
    NmiReport report = parse_nmi_report(read_text(plan_file["nmi_report"].get<std::string>()));
    plan.teacher_target_layer = report.target_layer;
  }

  ModelConfig teacher_config;
  ParamMap<float> teacher_params;
  const json& teacher_spec = plan_file.at("teacher");
  auto corpus = load_train_corpus(corpus_spec, student_config.channels);
  if (teacher_spec.contains("checkpoint")) {
    Checkpoint ckpt = read_checkpoint(teacher_spec["checkpoint"].get<std::string>());
    teacher_config = ModelConfig::from_json(ckpt.config.at("model"));
    teacher_params = params_from_tensors<float>(ckpt.params);
  } else if (teacher_spec.contains("synthetic")) {
    const json& syn = teacher_spec["synthetic"];
    teacher_config = ModelConfig::from_json(syn.at("model"));
    const json& pre = syn.at("pretrain");
    std::string task = pre.value("task", "autoencoder");
    size_t steps = pre.value("steps", size_t(400));
    size_t batch = pre.value("batch", size_t(8));
    double lr = pre.value("lr", 2e-3);
    uint64_t seed = pre.value("seed", uint64_t(7));
    if (!is_synthetic_corpus(corpus_spec))
      throw NumericError("distill: synthetic teacher pretraining needs a synthetic corpus");
    auto seg = make_shapes_corpus(parse_synthetic_spec(corpus_spec));
    teacher_params =
        task == "classifier"
            ? pretrain_token_classifier<float>(teacher_config, seg, steps, batch, lr, seed)
            : pretrain_patch_autoencoder<float>(teacher_config, seg, steps, batch, lr, seed);
  } else {
    throw CodecError("distill: teacher must specify 'checkpoint' or 'synthetic'");
  }

  DistillResult<float> result =
      run_distillation<float>(teacher_config, teacher_params, student_config, corpus, plan);

  ModelConfig restored = restore_student_heads(result.student_config);
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (const auto& [name, a] : result.student_params)
    tensors.emplace_back(name, Tensor(a.shape, a.data));
  json config = {{"model", restored.to_json()},
                 {"distill",
                  {{"target_layer", result.log.target_layer},
                   {"plan", plan.to_json()}}}};
  write_checkpoint(tensors, config, out);
  if (!log_path.empty()) write_text_atomic(log_path, result.log.serialize());
  return 0;
}

int run_probe(const std::string& mode_name, size_t layer, const std::string& ckpt_path,
              const std::string& corpus_spec, size_t epochs, double lr, size_t holdout,
              size_t classes, const std::string& out) {
  Checkpoint ckpt = read_checkpoint(ckpt_path);
  ModelConfig config = ModelConfig::from_json(ckpt.config.at("model"));
  ParamMap<double> backbone = params_from_tensors<double>(ckpt.params);
  // Alignment-only parameters are dropped downstream.
  std::erase_if(backbone, [](const auto& kv) {
    return kv.first.rfind("distill_proj", 0) == 0 || kv.first.rfind("extra_attn", 0) == 0;
  });
  auto corpus = load_seg_corpus(corpus_spec, config.channels);

  ProbeTrainSettings settings;
  settings.mode = probe_mode_from_name(mode_name);
  settings.layer = layer;
  settings.epochs = epochs;
  settings.lr = lr;
  settings.holdout_count = holdout;
  settings.num_classes = classes;
  ProbeResult result = train_probe(config, backbone, corpus, settings);

  json report = {{"mode", mode_name},
                 {"mean_iou", result.holdout_iou.mean_iou},
                 {"classes", result.holdout_iou.class_ids},
                 {"per_class_iou", result.holdout_iou.per_class_iou},
                 {"excluded_classes", result.holdout_iou.excluded},
                 {"head_channels", result.head.in_channels()}};
  std::string text = report.dump() + "\n";
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text_atomic(out, text);
  return 0;
}

EmbeddingSet load_embeddings(const std::string& path) {
  FeatureStack stack = read_feature_dump(path);
  if (stack.layers != 1)
    throw CodecError("embeddings '" + path + "' must be a single-layer feature dump");
  EmbeddingSet e;
  e.vectors = stack.layer(0);
  return e;
}

int run_report(const std::string& input) {
  std::string text = read_text(input);
  // Binary artifacts first (magic probes), then line-oriented text.
  if (text.size() >= 8) {
    std::string magic = text.substr(0, 8);
    if (magic == kCheckpointMagic) {
      Checkpoint ckpt = read_checkpoint(input);
      std::printf("checkpoint: %zu tensors\n", ckpt.params.size());
      size_t total = 0;
      for (const auto& [name, t] : ckpt.params) total += t.numel();
      std::printf("  total parameters: %zu\n", total);
      if (ckpt.config.contains("model"))
        std::printf("  model: %s\n", ckpt.config["model"].dump().c_str());
      return 0;
    }
    if (magic == kAttentionMagic) {
      AttentionStack s = read_attention_dump(input);
      std::printf("attention dump: layers=%zu heads=%zu tokens=%zu dtype=%s\n", s.layers,
                  s.heads, s.tokens, dtype_name(s.data.dtype()).c_str());
      return 0;
    }
    if (magic == kFeatureMagic) {
      FeatureStack s = read_feature_dump(input);
      std::printf("feature dump: layers=%zu tokens=%zu dim=%zu dtype=%s\n", s.layers, s.tokens,
                  s.dim, dtype_name(s.data.dtype()).c_str());
      return 0;
    }
  }
  // NMI report?
  try {
    NmiReport report = parse_nmi_report(text);
    std::printf("nmi report: %zu layers, s=%g, target layer %zu\n",
                report.per_layer_nmi.size(), report.s, report.target_layer);
    for (size_t l = 0; l < report.per_layer_nmi.size(); ++l)
      std::printf("  layer %2zu: nmi %.4f entropy %.4f distance %.4f %s\n", l + 1,
                  report.per_layer_nmi[l], report.per_layer_entropy[l],
                  report.per_layer_distance[l], pattern_name(report.pattern[l]).c_str());
    return 0;
  } catch (const std::exception&) {}
  // distill log?
  try {
    DistillLog log = DistillLog::parse(text);
    if (!log.per_epoch_holdout_kl.empty() || !log.per_step_loss.empty()) {
      std::printf("distill log: target layer %zu, %zu steps, %zu epoch rows\n",
                  log.target_layer, log.per_step_loss.size(),
                  log.per_epoch_holdout_kl.size());
      if (!log.per_epoch_holdout_kl.empty())
        std::printf("  holdout: %.5f -> %.5f\n", log.per_epoch_holdout_kl.front(),
                    log.per_epoch_holdout_kl.back());
      if (!log.per_epoch_student_nmi.empty())
        std::printf("  student nmi: %.4f -> %.4f\n", log.per_epoch_student_nmi.front(),
                    log.per_epoch_student_nmi.back());
      return 0;
    }
  } catch (const std::exception&) {}
  // manifest?
  try {
    CorpusManifest manifest = parse_manifest(text);
    std::printf("manifest: %zu records, %zu provenance entries\n", manifest.records.size(),
                manifest.provenance.size());
    for (const auto& p : manifest.provenance)
      std::printf("  step: %s %s\n", p.step.c_str(), p.params.dump().c_str());
    return 0;
  } catch (const std::exception&) {}
  throw CodecError("report: unrecognized artifact '" + input + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-pattern analysis, distillation, probing, and corpus curation"};
  app.require_subcommand(1);

  // nmi
  auto* nmi_cmd = app.add_subcommand(
      "nmi", "per-layer NMI / entropy / distance report from attention dumps or a checkpoint");
  std::vector<std::string> nmi_inputs;
  std::string nmi_ckpt, nmi_corpus, nmi_dump_dir, nmi_features_dir, nmi_embeddings_out,
      nmi_out;
  size_t nmi_sample = 0, nmi_grid_h = 0, nmi_grid_w = 0;
  double nmi_s = 0.09;  // default selection constant
  bool nmi_all_layers = false;
  nmi_cmd->add_option("--input", nmi_inputs, "attention dump file(s)");
  nmi_cmd->add_option("--ckpt", nmi_ckpt, "model checkpoint to analyze instead of dumps");
  nmi_cmd->add_option("--corpus", nmi_corpus,
                      "manifest path or synthetic-shapes:COUNTxHxW[:SEED] (with --ckpt)");
  nmi_cmd->add_option("--sample", nmi_sample, "number of corpus images to average (0 = all)");
  nmi_cmd->add_option("--s", nmi_s, "selection constant (default 0.09)");
  nmi_cmd->add_flag("--all-layers", nmi_all_layers,
                    "consider all layers for selection, not just the latter half");
  nmi_cmd->add_option("--grid-h", nmi_grid_h, "token grid height (for attended distance)");
  nmi_cmd->add_option("--grid-w", nmi_grid_w, "token grid width");
  nmi_cmd->add_option("--dump-attention", nmi_dump_dir, "write per-image .atn dumps here");
  nmi_cmd->add_option("--dump-features", nmi_features_dir, "write per-image .fet dumps here");
  nmi_cmd->add_option("--dump-embeddings", nmi_embeddings_out,
                      "write mean-pooled last-layer embeddings (single-layer .fet)");
  nmi_cmd->add_option("--out", nmi_out, "output path (stdout when omitted)");

  // select-layer
  auto* select_cmd =
      app.add_subcommand("select-layer", "pick the distillation target layer from NMI values");
  std::string select_report, select_values, select_out;
  double select_s = 0.09;
  bool select_half_only = false, select_all = false;
  select_cmd->add_option("--report", select_report, "nmi report file");
  select_cmd->add_option("--values", select_values, "JSON array of per-layer NMI values");
  select_cmd->add_option("--s", select_s, "selection constant (default 0.09)");
  select_cmd->add_flag("--half-only", select_half_only,
                       "restrict to the latter half of the layers (default)");
  select_cmd->add_flag("--all-layers", select_all, "consider every layer");
  select_cmd->add_option("--out", select_out, "output path (stdout when omitted)");

  // cka
  auto* cka_cmd = app.add_subcommand("cka", "layer-pair linear CKA grid between feature dumps");
  std::vector<std::string> cka_a, cka_b;
  bool cka_per_image = false;
  std::string cka_out;
  cka_cmd->add_option("--features-a", cka_a, "feature dump(s) for model A")->required();
  cka_cmd->add_option("--features-b", cka_b, "feature dump(s) for model B")->required();
  cka_cmd->add_flag("--per-image", cka_per_image,
                    "average per-image CKA instead of pooling tokens");
  cka_cmd->add_option("--out", cka_out, "output path (stdout when omitted)");

  // distill
  auto* distill_cmd = app.add_subcommand("distill", "run the distillation pipeline");
  std::string distill_plan, distill_corpus, distill_out, distill_log;
  distill_cmd->add_option("--plan", distill_plan, "plan config (JSON)")->required();
  distill_cmd->add_option("--corpus", distill_corpus,
                          "manifest path or synthetic-shapes:COUNTxHxW[:SEED]")->required();
  distill_cmd->add_option("--out", distill_out, "student checkpoint output")->required();
  distill_cmd->add_option("--log", distill_log, "training log output");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "train a linear probe on frozen features");
  std::string probe_mode = "lp", probe_ckpt, probe_corpus, probe_out;
  size_t probe_layer = 0, probe_epochs = 150, probe_holdout = 4, probe_classes = 4;
  double probe_lr = 0.05;
  probe_cmd->add_option("--mode", probe_mode, "ll-fpn | multi-layer | lp | layerwise");
  probe_cmd->add_option("--layer", probe_layer, "probed layer (layerwise mode, 1-based)");
  probe_cmd->add_option("--ckpt", probe_ckpt, "backbone checkpoint")->required();
  probe_cmd->add_option("--corpus", probe_corpus,
                        "manifest (images + <path>.labels.pgm) or synthetic-shapes spec")
      ->required();
  probe_cmd->add_option("--epochs", probe_epochs, "head optimization iterations");
  probe_cmd->add_option("--lr", probe_lr, "head learning rate");
  probe_cmd->add_option("--holdout", probe_holdout, "held-out image count");
  probe_cmd->add_option("--classes", probe_classes, "segmentation class count");
  probe_cmd->add_option("--out", probe_out, "output path (stdout when omitted)");

  // curate
  auto* curate_cmd = app.add_subcommand("curate", "corpus curation steps");
  curate_cmd->require_subcommand(1);

  auto* interval_cmd = curate_cmd->add_subcommand("interval", "fixed-interval sequence sampling");
  std::string interval_manifest, interval_out;
  size_t interval_k = 10;
  interval_cmd->add_option("--manifest", interval_manifest, "input manifest")->required();
  interval_cmd->add_option("--k", interval_k, "keep every k-th frame per sequence");
  interval_cmd->add_option("--out", interval_out, "output manifest")->required();

  auto* dedup_cmd = curate_cmd->add_subcommand("dedup", "greedy similarity deduplication");
  std::string dedup_manifest, dedup_embeddings, dedup_out, dedup_report;
  double dedup_threshold = 0.95;
  dedup_cmd->add_option("--manifest", dedup_manifest, "input manifest")->required();
  dedup_cmd->add_option("--embeddings", dedup_embeddings,
                        "row-per-record embeddings (single-layer feature dump)")->required();
  dedup_cmd->add_option("--threshold", dedup_threshold, "cosine threshold (default 0.95)");
  dedup_cmd->add_option("--out", dedup_out, "output manifest")->required();
  dedup_cmd->add_option("--report", dedup_report, "curation report output");

  auto* gray_cmd = curate_cmd->add_subcommand("grayscale", "convert an RGB raster to gray");
  std::string gray_in, gray_out;
  gray_cmd->add_option("--input", gray_in, "input PPM")->required();
  gray_cmd->add_option("--out", gray_out, "output PPM")->required();

  auto* balance_cmd = curate_cmd->add_subcommand("balance", "class-balanced subsampling");
  std::string balance_manifest, balance_out;
  size_t balance_total = 0;
  uint64_t balance_seed = default_seed();
  balance_cmd->add_option("--manifest", balance_manifest, "input manifest")->required();
  balance_cmd->add_option("--total", balance_total, "records to keep")->required();
  balance_cmd->add_option("--seed", balance_seed, "sampling seed (env ATTNKIT_SEED)");
  balance_cmd->add_option("--out", balance_out, "output manifest")->required();

  auto* mix_cmd = curate_cmd->add_subcommand("mix", "concatenate manifests with provenance");
  std::vector<std::string> mix_inputs;
  std::vector<size_t> mix_grayscale;
  std::string mix_out;
  mix_cmd->add_option("--manifests", mix_inputs, "input manifests in order")->required();
  mix_cmd->add_option("--grayscale", mix_grayscale,
                      "0/1 per source: record a grayscale transform");
  mix_cmd->add_option("--out", mix_out, "output manifest")->required();

  auto* sim_cmd = curate_cmd->add_subcommand("similarity", "cross-dataset mean cosine");
  std::string sim_a, sim_b, sim_out;
  size_t sim_cap = 1000000;
  uint64_t sim_seed = default_seed();
  sim_cmd->add_option("--embeddings-a", sim_a, "first embedding dump")->required();
  sim_cmd->add_option("--embeddings-b", sim_b, "second embedding dump")->required();
  sim_cmd->add_option("--pair-cap", sim_cap, "max exact pairs before sampling");
  sim_cmd->add_option("--seed", sim_seed, "pair-sampling seed (env ATTNKIT_SEED)");
  sim_cmd->add_option("--out", sim_out, "output path (stdout when omitted)");

  // report
  auto* report_cmd = app.add_subcommand("report", "summarize any toolkit artifact");
  std::string report_input;
  report_cmd->add_option("--input", report_input, "artifact path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*nmi_cmd)
      return run_nmi(nmi_inputs, nmi_ckpt, nmi_corpus, nmi_sample, nmi_s, !nmi_all_layers,
                     nmi_grid_h, nmi_grid_w, nmi_dump_dir, nmi_features_dir,
                     nmi_embeddings_out, nmi_out);
    if (*select_cmd)
      return run_select_layer(select_report, select_values, select_s, !select_all, select_out);
    if (*cka_cmd) return run_cka(cka_a, cka_b, cka_per_image, cka_out);
    if (*distill_cmd) return run_distill(distill_plan, distill_corpus, distill_out, distill_log);
    if (*probe_cmd)
      return run_probe(probe_mode, probe_layer, probe_ckpt, probe_corpus, probe_epochs,
                       probe_lr, probe_holdout, probe_classes, probe_out);
    if (*curate_cmd) {
      if (*interval_cmd) {
        CurationReport report;
        CorpusManifest out = interval_sample(read_manifest(interval_manifest), interval_k,
                                             &report);
        write_manifest(out, interval_out);
        return 0;
      }
      if (*dedup_cmd) {
        CorpusManifest manifest = read_manifest(dedup_manifest);
        EmbeddingSet embeddings = load_embeddings(dedup_embeddings);
        if (embeddings.count() != manifest.records.size())
          throw NumericError("dedup: embedding rows do not match manifest records");
        CurationReport report;
        auto kept = greedy_dedup(embeddings, dedup_threshold, &report);
        CorpusManifest out = select_records(manifest, kept);
        out.add_provenance("greedy_dedup", {{"threshold", dedup_threshold}});
        write_manifest(out, dedup_out);
        if (!dedup_report.empty())
          write_text_atomic(dedup_report, report.to_json().dump() + "\n");
        return 0;
      }
      if (*gray_cmd) {
        write_raster(to_grayscale(read_raster(gray_in)), gray_out);
        return 0;
      }
      if (*balance_cmd) {
        CorpusManifest out =
            balanced_subsample(read_manifest(balance_manifest), balance_total, balance_seed);
        write_manifest(out, balance_out);
        return 0;
      }
      if (*mix_cmd) {
        std::vector<CorpusManifest> sources;
        for (const auto& path : mix_inputs) sources.push_back(read_manifest(path));
        std::vector<SourceTransform> transforms;
        if (!mix_grayscale.empty()) {
          if (mix_grayscale.size() != sources.size())
            throw NumericError("mix: --grayscale list must match --manifests");
          for (size_t flag : mix_grayscale) transforms.push_back({flag != 0});
        }
        write_manifest(mix_manifests(sources, transforms), mix_out);
        return 0;
      }
      if (*sim_cmd) {
        CrossSimilarity sim =
            cross_similarity(load_embeddings(sim_a), load_embeddings(sim_b), sim_cap, sim_seed);
        json result = {{"mean_cosine", sim.mean_cosine},
                       {"pairs_evaluated", sim.pairs_evaluated},
                       {"exact", sim.exact}};
        std::string text = result.dump() + "\n";
        if (sim_out.empty()) std::fputs(text.c_str(), stdout);
        else write_text_atomic(sim_out, text);
        return 0;
      }
    }
    if (*report_cmd) return run_report(report_input);
  } catch (const CodecError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
