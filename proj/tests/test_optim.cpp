// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "attnkit/optim.hpp"
#include "oracles.hpp"

using namespace attnkit;

TEST_CASE("adamw leaves params unchanged under zero gradients and zero decay") {
  std::map<std::string, ArrayD> params{{"w", ArrayD({3}, {1.0, -2.0, 0.5})}};
  std::map<std::string, ArrayD> grads{{"w", ArrayD::zeros({3})}};
  AdamWState<double> state;
  state.options.weight_decay = 0.0;
  ArrayD before = params.at("w");
  adamw_step(params, grads, state, 0.1);
  for (size_t i = 0; i < 3; ++i) CHECK(params.at("w").data[i] == before.data[i]);
}

TEST_CASE("adamw increments the step count by exactly one") {
  std::map<std::string, ArrayD> params{{"w", ArrayD({1}, {1.0})}};
  std::map<std::string, ArrayD> grads{{"w", ArrayD({1}, {0.1})}};
  AdamWState<double> state;
  CHECK(state.step == 0);
  adamw_step(params, grads, state, 0.01);
  CHECK(state.step == 1);
  adamw_step(params, grads, state, 0.01);
  CHECK(state.step == 2);
}

TEST_CASE("adamw matches the hand-computed two-step recurrence") {
  // scalar p0 = 1, gradient 0.5 on both steps, lr 0.1, betas 0.9/0.95,
  // weight decay 0.05, eps 1e-8; values frozen from the closed-form update
  std::map<std::string, ArrayD> params{{"p", ArrayD({1}, {1.0})}};
  std::map<std::string, ArrayD> grads{{"p", ArrayD({1}, {0.5})}};
  AdamWState<double> state;
  adamw_step(params, grads, state, 0.1);
  CHECK(params.at("p").data[0] == doctest::Approx(0.8950000019999999).epsilon(1e-14));
  adamw_step(params, grads, state, 0.1);
  CHECK(params.at("p").data[0] == doctest::Approx(0.7905250039899998).epsilon(1e-14));
}

TEST_CASE("adamw validates gradient presence and shape") {
  std::map<std::string, ArrayD> params{{"w", ArrayD({2}, {1.0, 2.0})}};
  AdamWState<double> state;
  std::map<std::string, ArrayD> missing;
  CHECK_THROWS_AS(adamw_step(params, missing, state, 0.1), NumericError);
  std::map<std::string, ArrayD> wrong{{"w", ArrayD({3}, {0.0, 0.0, 0.0})}};
  CHECK_THROWS_AS(adamw_step(params, wrong, state, 0.1), NumericError);
}

TEST_CASE("lr schedule: warmup, peak, cosine midpoint, end") {
  LrSchedule s;
  s.base_lr = 1e-4;
  s.batch_size = 1024;  // peak = 1e-4 * 1024 / 256 = 4e-4
  s.warmup_steps = 100;
  s.total_steps = 1100;
  CHECK(lr_at(0, s) == 0.0);
  CHECK(lr_at(50, s) == doctest::Approx(2e-4));
  CHECK(lr_at(100, s) == doctest::Approx(4e-4).epsilon(1e-15));
  // cosine midpoint: step 100 + 500
  CHECK(lr_at(600, s) == doctest::Approx(2e-4).epsilon(1e-12));
  CHECK(lr_at(1100, s) == doctest::Approx(0.0).epsilon(1e-18));
  CHECK(lr_at(5000, s) == 0.0);
}

TEST_CASE("lr schedule applies the linear scaling rule") {
  LrSchedule s;
  s.base_lr = 1e-4;
  s.batch_size = 4096;
  CHECK(s.peak() == doctest::Approx(1.6e-3));
  s.batch_size = 256;
  CHECK(s.peak() == doctest::Approx(1e-4));
}

TEST_CASE("lr schedule rejects inverted settings") {
  LrSchedule s;
  s.warmup_steps = 10;
  s.total_steps = 10;
  CHECK_THROWS_AS(lr_at(0, s), NumericError);
}
