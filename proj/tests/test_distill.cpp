// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "attnkit/distill.hpp"
#include "oracles.hpp"

using namespace attnkit;

namespace {

ModelConfig tiny_config(size_t depth, size_t dim, size_t heads) {
  ModelConfig c;
  c.depth = depth;
  c.dim = dim;
  c.heads = heads;
  c.patch = 8;
  c.image_h = 16;
  c.image_w = 16;  // 4 tokens
  c.channels = 3;
  return c;
}

std::vector<Array<float>> tiny_corpus(const ModelConfig& c, size_t count, uint64_t seed) {
  Rng rng(seed);
  std::vector<Array<float>> images;
  for (size_t i = 0; i < count; ++i) {
    Array<float> img = Array<float>::zeros({c.image_h, c.image_w, c.channels});
    for (float& v : img.data) v = static_cast<float>(rng.uniform());
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace

TEST_CASE("attention_kl_loss basics") {
  Rng rng(501);
  SUBCASE("zero when teacher equals student") {
    std::vector<ArrayD> heads = {oracles::random_stochastic(4, rng),
                                 oracles::random_stochastic(4, rng)};
    CHECK(attention_kl_loss(heads, heads) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("one-hot teacher vs uniform student is ln 2 per row") {
    ArrayD t({2, 2}, {1.0, 0.0, 0.0, 1.0});
    ArrayD s({2, 2}, {0.5, 0.5, 0.5, 0.5});
    CHECK(attention_kl_loss({t}, {s}) ==
          doctest::Approx(0.6931471805599453).epsilon(1e-12));
  }
  SUBCASE("random pairs match the triple-loop oracle") {
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<ArrayD> t = {oracles::random_stochastic(4, rng),
                               oracles::random_stochastic(4, rng)};
      std::vector<ArrayD> s = {oracles::random_stochastic(4, rng),
                               oracles::random_stochastic(4, rng)};
      double got = attention_kl_loss(t, s);
      CHECK(got == doctest::Approx(oracles::kl_triple_loop(t, s)).epsilon(1e-9));
      CHECK(got >= 0.0);
    }
  }
  SUBCASE("head-count mismatch points at alignment") {
    std::vector<ArrayD> t = {oracles::random_stochastic(4, rng),
                             oracles::random_stochastic(4, rng)};
    std::vector<ArrayD> s = {oracles::random_stochastic(4, rng)};
    CHECK_THROWS_WITH_AS(attention_kl_loss(t, s),
                         "attention_kl_loss: head counts differ (2 vs 1); "
                         "align_student_heads first",
                         NumericError);
  }
  SUBCASE("token-count mismatch is an error") {
    std::vector<ArrayD> t = {oracles::random_stochastic(4, rng)};
    std::vector<ArrayD> s = {oracles::random_stochastic(5, rng)};
    CHECK_THROWS_AS(attention_kl_loss(t, s), NumericError);
  }
}

TEST_CASE("align_student_heads follows the adaptive-head rule") {
  ModelConfig student = tiny_config(2, 384, 6);
  SUBCASE("teacher with 16 heads gives a 16-head last layer of dim 24") {
    ModelConfig aligned = align_student_heads(student, 16);
    CHECK(aligned.last_layer_heads == 16);
    CHECK(aligned.dim / aligned.last_layer_heads == 24);
    CHECK(aligned.heads == 6);
    CHECK(aligned.heads_at(0) == 6);
    CHECK(aligned.heads_at(1) == 16);
  }
  SUBCASE("matching head counts leave the config unchanged") {
    ModelConfig aligned = align_student_heads(student, 6);
    CHECK(aligned.last_layer_heads == 0);
    CHECK(aligned.to_json() == student.to_json());
  }
  SUBCASE("non-divisible head count is an error naming both values") {
    CHECK_THROWS_WITH_AS(align_student_heads(student, 7),
                         "align_student_heads: student dim 384 not divisible by teacher "
                         "head count 7",
                         NumericError);
  }
  SUBCASE("align then restore is the identity on the config") {
    ModelConfig aligned = align_student_heads(student, 16);
    CHECK(restore_student_heads(aligned).to_json() == student.to_json());
  }
}

TEST_CASE("feature_cosine_loss basics") {
  Rng rng(503);
  ArrayD f = oracles::random_matrix(4, 6, rng);
  CHECK(feature_cosine_loss(f, f) == doctest::Approx(0.0).epsilon(1e-12));
  ArrayD a({2, 2}, {1.0, 0.0, 0.0, 3.0});
  ArrayD b({2, 2}, {0.0, 2.0, 5.0, 0.0});
  CHECK(feature_cosine_loss(a, b) == doctest::Approx(1.0));
  SUBCASE("random pair matches the per-token oracle") {
    ArrayD t = oracles::random_matrix(5, 4, rng);
    ArrayD s = oracles::random_matrix(5, 4, rng);
    double expected = 0.0;
    for (size_t i = 0; i < 5; ++i) {
      double dot = 0, nt = 0, ns = 0;
      for (size_t j = 0; j < 4; ++j) {
        dot += t.data[i * 4 + j] * s.data[i * 4 + j];
        nt += t.data[i * 4 + j] * t.data[i * 4 + j];
        ns += s.data[i * 4 + j] * s.data[i * 4 + j];
      }
      expected += 1.0 - dot / std::sqrt(nt * ns);
    }
    expected /= 5.0;
    CHECK(feature_cosine_loss(t, s) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("zero-norm rows are an error") {
    ArrayD z = ArrayD::zeros({4, 6});
    CHECK_THROWS_AS(feature_cosine_loss(f, z), NumericError);
  }
}

TEST_CASE("concat_multilayer_targets stacks head blocks in layer order") {
  Rng rng(507);
  std::vector<ArrayD> layer17 = {oracles::random_stochastic(4, rng),
                                 oracles::random_stochastic(4, rng)};
  std::vector<ArrayD> layer18 = {oracles::random_stochastic(4, rng),
                                 oracles::random_stochastic(4, rng)};
  SUBCASE("single layer is the identity") {
    auto out = concat_multilayer_targets({layer17});
    REQUIRE(out.size() == 2);
    CHECK(out[0].data == layer17[0].data);
    CHECK(out[1].data == layer17[1].data);
  }
  SUBCASE("two layers concatenate with the first block from the first layer") {
    auto out = concat_multilayer_targets({layer17, layer18});
    REQUIRE(out.size() == 4);
    CHECK(out[0].data == layer17[0].data);
    CHECK(out[2].data == layer18[0].data);
  }
  SUBCASE("permuting the layer list permutes head blocks") {
    auto ab = concat_multilayer_targets({layer17, layer18});
    auto ba = concat_multilayer_targets({layer18, layer17});
    CHECK(ab[0].data == ba[2].data);
    CHECK(ab[3].data == ba[1].data);
  }
  SUBCASE("token mismatch is an error") {
    std::vector<ArrayD> bad = {oracles::random_stochastic(5, rng)};
    CHECK_THROWS_AS(concat_multilayer_targets({layer17, bad}), NumericError);
  }
}

TEST_CASE("multilayer loss equals the mean of single-layer losses") {
  Rng rng(509);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<std::vector<ArrayD>> teacher_layers;
    std::vector<std::vector<ArrayD>> student_layers;
    const size_t layer_count = 2 + rng.below(2);
    for (size_t l = 0; l < layer_count; ++l) {
      std::vector<ArrayD> t, s;
      for (int m = 0; m < 3; ++m) {
        t.push_back(oracles::random_stochastic(4, rng));
        s.push_back(oracles::random_stochastic(4, rng));
      }
      teacher_layers.push_back(t);
      student_layers.push_back(s);
    }
    double concat_loss = attention_kl_loss(concat_multilayer_targets(teacher_layers),
                                           concat_multilayer_targets(student_layers));
    double mean_loss = 0.0;
    for (size_t l = 0; l < layer_count; ++l)
      mean_loss += attention_kl_loss(teacher_layers[l], student_layers[l]);
    mean_loss /= static_cast<double>(layer_count);
    CHECK(concat_loss == doctest::Approx(mean_loss).epsilon(1e-12));
  }
}

TEST_CASE("kl gradient through a 2-layer model passes finite differences at the logits") {
  ModelConfig c = tiny_config(2, 16, 2);
  ParamMap<double> params = init_params<double>(c, 21);
  Rng rng(511);
  ArrayD img = ArrayD::zeros({c.image_h, c.image_w, c.channels});
  for (double& v : img.data) v = rng.uniform();

  // Teacher targets: fixed random stochastic heads.
  std::vector<ArrayD> targets = {oracles::random_stochastic(4, rng),
                                 oracles::random_stochastic(4, rng)};

  Graph<double> g;
  auto pid = make_param_nodes(g, params, c, true);
  ForwardNodes<double> fwd = forward_graph(g, c, pid, g.constant(patchify(img, c)));
  std::vector<int> head_losses;
  for (size_t m = 0; m < 2; ++m)
    head_losses.push_back(
        g.kl_vs_target_rows(fwd.attention_scores.back()[m], g.constant(targets[m])));
  int loss = g.mean_scalars(head_losses);
  g.backward(loss);

  // FD at the score (logit) nodes: the loss as a function of the scores alone.
  for (size_t m = 0; m < 2; ++m) {
    ArrayD scores = g.value(fwd.attention_scores.back()[m]);
    ArrayD analytic = g.grad(fwd.attention_scores.back()[m]);
    for (size_t i = 0; i < scores.numel(); ++i) {
      auto eval = [&](double v) {
        ArrayD perturbed = scores;
        perturbed.data[i] = v;
        Graph<double> h;
        std::vector<int> losses;
        for (size_t mm = 0; mm < 2; ++mm) {
          ArrayD base = (mm == m) ? perturbed : g.value(fwd.attention_scores.back()[mm]);
          losses.push_back(h.kl_vs_target_rows(h.input(base, true), h.constant(targets[mm])));
        }
        return h.value(h.mean_scalars(losses)).data[0];
      };
      double fd = oracles::central_difference(eval, scores.data[i], 1e-5);
      CAPTURE(m);
      CAPTURE(i);
      CHECK(oracles::grad_close(analytic.data[i], fd, 1e-4));
    }
  }
}

TEST_CASE("run_distillation with zero epochs returns the initialization") {
  ModelConfig teacher = tiny_config(2, 16, 2);
  ModelConfig student = tiny_config(1, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 31);
  auto corpus = tiny_corpus(teacher, 4, 32);
  DistillPlan plan;
  plan.epochs = 0;
  plan.steps_per_epoch = 0;
  plan.holdout_count = 0;
  plan.teacher_target_layer = 2;
  plan.seed = 77;
  DistillResult<float> result = run_distillation(teacher, tp, student, corpus, plan);
  CHECK(result.log.per_step_loss.empty());
  CHECK(result.log.per_epoch_holdout_kl.empty());
  ParamMap<float> init = init_params<float>(result.student_config, 77);
  REQUIRE(init.size() == result.student_params.size());
  for (const auto& [name, a] : init) CHECK(result.student_params.at(name).data == a.data);
}

TEST_CASE("student initialized from an identical teacher starts at near-zero loss") {
  ModelConfig teacher = tiny_config(2, 16, 2);
  ParamMap<float> tp = init_params<float>(teacher, 41);
  auto corpus = tiny_corpus(teacher, 6, 42);
  DistillPlan plan;
  plan.teacher_target_layer = 2;  // distill the teacher's own last layer
  plan.epochs = 1;
  plan.steps_per_epoch = 2;
  plan.warmup_steps = 1;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 43;
  DistillResult<float> result =
      run_distillation(teacher, tp, teacher, corpus, plan, &tp);
  CHECK(result.log.per_epoch_holdout_kl[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(result.log.per_step_loss[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("run_distillation is bitwise deterministic for a fixed seed") {
  ModelConfig teacher = tiny_config(2, 16, 2);
  ModelConfig student = tiny_config(2, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 51);
  auto corpus = tiny_corpus(teacher, 8, 52);
  DistillPlan plan;
  plan.epochs = 2;
  plan.steps_per_epoch = 3;
  plan.warmup_steps = 2;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 53;
  DistillResult<float> a = run_distillation(teacher, tp, student, corpus, plan);
  DistillResult<float> b = run_distillation(teacher, tp, student, corpus, plan);
  CHECK(a.log.serialize() == b.log.serialize());
  for (const auto& [name, arr] : a.student_params)
    CHECK(b.student_params.at(name).data == arr.data);
}

TEST_CASE("run_distillation resolves the target layer by NMI when unset") {
  ModelConfig teacher = tiny_config(4, 16, 2);
  ModelConfig student = tiny_config(2, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 61);
  auto corpus = tiny_corpus(teacher, 6, 62);
  DistillPlan plan;
  plan.teacher_target_layer = 0;
  plan.epochs = 1;
  plan.steps_per_epoch = 1;
  plan.warmup_steps = 0;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.selection_sample = 4;
  plan.seed = 63;
  DistillResult<float> result = run_distillation(teacher, tp, student, corpus, plan);
  CHECK(result.log.target_layer >= 3);  // latter half of 4 layers
  CHECK(result.log.target_layer <= 4);
}

TEST_CASE("extra-attention-layer alignment trains and restores") {
  ModelConfig teacher = tiny_config(2, 16, 4);
  ModelConfig student = tiny_config(2, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 71);
  auto corpus = tiny_corpus(teacher, 6, 72);
  DistillPlan plan;
  plan.teacher_target_layer = 2;
  plan.head_alignment = HeadAlignment::extra_attention_layer;
  plan.epochs = 1;
  plan.steps_per_epoch = 2;
  plan.warmup_steps = 1;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 73;
  DistillResult<float> result = run_distillation(teacher, tp, student, corpus, plan);
  CHECK(result.student_config.extra_attention_layer);
  CHECK(result.student_config.extra_layer_heads == 4);
  CHECK(result.student_params.count("extra_attn.q.weight") == 1);
  ModelConfig restored = restore_student_heads(result.student_config);
  CHECK(restored.to_json() == student.to_json());
}

TEST_CASE("extra-layer alignment initializes the fresh layer for pretrained students") {
  ModelConfig teacher = tiny_config(2, 16, 4);
  ModelConfig student = tiny_config(2, 16, 2);
  ParamMap<float> tp = init_params<float>(teacher, 75);
  ParamMap<float> pretrained = init_params<float>(student, 76);  // no extra_attn params
  auto corpus = tiny_corpus(teacher, 6, 77);
  DistillPlan plan;
  plan.teacher_target_layer = 2;
  plan.head_alignment = HeadAlignment::extra_attention_layer;
  plan.epochs = 1;
  plan.steps_per_epoch = 1;
  plan.warmup_steps = 0;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 78;
  DistillResult<float> result =
      run_distillation(teacher, tp, student, corpus, plan, &pretrained);
  CHECK(result.student_params.count("extra_attn.q.weight") == 1);
  // the pretrained backbone weights came through untouched at step 0 logging
  CHECK(result.log.per_epoch_holdout_kl.size() == 2);
}

TEST_CASE("feature-cosine distillation runs and logs its loss") {
  ModelConfig teacher = tiny_config(2, 16, 2);
  ModelConfig student = tiny_config(2, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 81);
  auto corpus = tiny_corpus(teacher, 6, 82);
  DistillPlan plan;
  plan.loss_kind = LossKind::feature_cosine;
  plan.teacher_target_layer = 2;
  plan.epochs = 2;
  plan.steps_per_epoch = 2;
  plan.warmup_steps = 1;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 83;
  DistillResult<float> result = run_distillation(teacher, tp, student, corpus, plan);
  CHECK(result.student_params.count("distill_proj.weight") == 1);
  CHECK(result.log.per_epoch_holdout_kl.size() == 3);
  // the projection is trained, so the loss should not increase much
  CHECK(result.log.per_epoch_holdout_kl.back() <=
        result.log.per_epoch_holdout_kl.front() + 0.1);
}

TEST_CASE("divergence aborts with the failing step index") {
  ModelConfig teacher = tiny_config(2, 16, 2);
  ModelConfig student = tiny_config(2, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 1);
  auto corpus = tiny_corpus(teacher, 6, 2);
  DistillPlan plan;
  plan.teacher_target_layer = 2;
  plan.epochs = 10;
  plan.steps_per_epoch = 10;
  plan.warmup_steps = 1;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 3;
  plan.base_lr = 1e12;  // blows up within a few steps
  CHECK_THROWS_WITH_AS(run_distillation(teacher, tp, student, corpus, plan),
                       "run_distillation: loss diverged at step 2", NumericError);
}

TEST_CASE("multilayer distillation aligns the student to the concatenated head count") {
  ModelConfig teacher = tiny_config(4, 16, 2);
  ModelConfig student = tiny_config(2, 16, 2);
  ParamMap<float> tp = init_params<float>(teacher, 91);
  auto corpus = tiny_corpus(teacher, 6, 92);
  DistillPlan plan;
  plan.loss_kind = LossKind::attention_kl_multilayer;
  plan.multilayer_targets = {3, 4};
  plan.epochs = 1;
  plan.steps_per_epoch = 2;
  plan.warmup_steps = 1;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 93;
  DistillResult<float> result = run_distillation(teacher, tp, student, corpus, plan);
  // two layers of two heads each concatenate to a 4-head target
  CHECK(result.student_config.last_layer_heads == 4);
  CHECK(result.log.target_layer == 3);  // first listed layer
  CHECK(result.log.per_step_loss.size() == 2);
}

TEST_CASE("augmented distillation stays deterministic and finite") {
  ModelConfig teacher = tiny_config(2, 16, 2);
  ModelConfig student = tiny_config(2, 8, 2);
  ParamMap<float> tp = init_params<float>(teacher, 95);
  auto corpus = tiny_corpus(teacher, 8, 96);
  DistillPlan plan;
  plan.teacher_target_layer = 2;
  plan.epochs = 2;
  plan.steps_per_epoch = 2;
  plan.warmup_steps = 1;
  plan.batch_size = 2;
  plan.holdout_count = 2;
  plan.seed = 97;
  plan.augment_flip = true;
  plan.augment_crop = true;
  DistillResult<float> a = run_distillation(teacher, tp, student, corpus, plan);
  DistillResult<float> b = run_distillation(teacher, tp, student, corpus, plan);
  CHECK(a.log.serialize() == b.log.serialize());
  for (double v : a.log.per_step_loss) CHECK(std::isfinite(v));

  DistillPlan bad = plan;
  bad.crop_scale_min = 0.0;
  CHECK_THROWS_AS(bad.validate(teacher), NumericError);
}

TEST_CASE("distill plan JSON round-trip and validation") {
  DistillPlan plan;
  plan.loss_kind = LossKind::attention_kl_multilayer;
  plan.multilayer_targets = {3, 4};
  plan.seed = 99;
  DistillPlan back = DistillPlan::from_json(plan.to_json());
  CHECK(back.loss_kind == LossKind::attention_kl_multilayer);
  CHECK(back.multilayer_targets == std::vector<size_t>{3, 4});
  CHECK(back.seed == 99);

  ModelConfig teacher = tiny_config(4, 16, 2);
  plan.multilayer_targets = {};
  CHECK_THROWS_AS(plan.validate(teacher), NumericError);  // multilayer kind needs targets
  DistillPlan single;
  single.multilayer_targets = {3};
  CHECK_THROWS_AS(single.validate(teacher), NumericError);  // targets need multilayer kind
  DistillPlan bad;
  bad.teacher_target_layer = 9;
  CHECK_THROWS_AS(bad.validate(teacher), NumericError);
}

TEST_CASE("distill log serialization round-trips") {
  DistillLog log;
  log.target_layer = 7;
  log.per_step_loss = {1.5, 1.25, 1.0, 0.75};
  log.per_epoch_holdout_kl = {2.0, 1.0, 0.5};
  log.per_epoch_student_nmi = {0.01, 0.05, 0.08};
  DistillLog back = DistillLog::parse(log.serialize());
  CHECK(back.target_layer == 7);
  CHECK(back.per_step_loss == log.per_step_loss);
  CHECK(back.per_epoch_holdout_kl == log.per_epoch_holdout_kl);
  CHECK(back.per_epoch_student_nmi == log.per_epoch_student_nmi);
}
