// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#include "dipfuse/adam.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"

using namespace dipfuse;

namespace {

// A store with one scalar parameter, for tracing the recurrence by hand.
ParameterStore<double> scalar_store(double theta, double grad) {
  ParameterStore<double> s;
  ParamTensor<double> t;
  t.name = "theta";
  t.shape = {1};
  t.value = {theta};
  t.grad = {grad};
  s.tensors.push_back(std::move(t));
  return s;
}

}  // namespace

TEST_CASE("zero gradients leave parameters unchanged but advance the step") {
  auto store = scalar_store(0.7, 0.0);
  auto st = make_adam(store, 0.01);
  adam_step(store, st);
  CHECK(store.tensors[0].value[0] == 0.7);
  CHECK(st.step_count == 1);
}

TEST_CASE("first step matches the hand-evaluated recurrence") {
  auto store = scalar_store(0.0, 1.0);
  auto st = make_adam(store, 0.01);
  adam_step(store, st);
  // t=1: m-hat = g = 1, v-hat = g^2 = 1, step = lr/(1 + eps).
  const double expected = -0.01 * 1.0 / (1.0 + 1e-8);
  CHECK(store.tensors[0].value[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(store.tensors[0].value[0] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("momentum keeps moving after the gradient stops") {
  auto store = scalar_store(0.0, 1.0);
  auto st = make_adam(store, 0.01);
  adam_step(store, st);
  const double after_one = store.tensors[0].value[0];

  // Two more steps with g = 0; hand-evaluate the recurrence.
  double m = 0.1, v = 0.001;
  double theta = after_one;
  for (int t = 2; t <= 3; ++t) {
    m = 0.9 * m;
    v = 0.999 * v;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    theta -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);

    store.tensors[0].grad[0] = 0.0;
    adam_step(store, st);
    CHECK(store.tensors[0].value[0] == doctest::Approx(theta).epsilon(1e-12));
  }
  CHECK(store.tensors[0].value[0] < after_one);  // still descending
  CHECK(st.step_count == 3);
}

TEST_CASE("non-finite gradients are rejected") {
  auto store = scalar_store(0.0, std::numeric_limits<double>::quiet_NaN());
  auto st = make_adam(store, 0.01);
  CHECK_THROWS_AS(adam_step(store, st), std::invalid_argument);
}
