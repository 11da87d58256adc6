// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dipfuse/net.hpp"

namespace dipfuse {

template <typename T>
struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step_count = 0;
  std::vector<std::vector<T>> m;  // first moments, aligned with the store
  std::vector<std::vector<T>> v;  // second moments
};

template <typename T>
AdamState<T> make_adam(const ParameterStore<T>& store, double lr = 0.01) {
  AdamState<T> st;
  st.lr = lr;
  st.m.reserve(store.tensors.size());
  st.v.reserve(store.tensors.size());
  for (const auto& t : store.tensors) {
    st.m.emplace_back(t.size(), T(0));
    st.v.emplace_back(t.size(), T(0));
  }
  return st;
}

/// One Adam update with bias correction:
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
/// Consumes the gradients in store.tensors[i].grad. Throws on non-finite
/// gradient entries.
template <typename T>
void adam_step(ParameterStore<T>& store, AdamState<T>& st) {
  if (st.m.size() != store.tensors.size()) {
    throw std::invalid_argument("adam: state does not match store");
  }
  ++st.step_count;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (size_t i = 0; i < store.tensors.size(); ++i) {
    auto& t = store.tensors[i];
    auto& m = st.m[i];
    auto& v = st.v[i];
    if (m.size() != t.size() || t.grad.size() != t.size()) {
      throw std::invalid_argument("adam: moment shapes do not match parameters");
    }
    for (size_t j = 0; j < t.size(); ++j) {
      const double g = static_cast<double>(t.grad[j]);
      if (!std::isfinite(g)) {
        throw std::invalid_argument("adam: non-finite gradient in " + t.name);
      }
      const double mj = st.beta1 * static_cast<double>(m[j]) + (1.0 - st.beta1) * g;
      const double vj = st.beta2 * static_cast<double>(v[j]) + (1.0 - st.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double step = st.lr * (mj / bc1) / (std::sqrt(vj / bc2) + st.epsilon);
      t.value[j] = static_cast<T>(static_cast<double>(t.value[j]) - step);
    }
  }
}

}  // namespace dipfuse
