// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dipfuse {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty unless gradient tracking is in use

  static Tensor zeros(std::vector<int> shape_) {
    Tensor t;
    size_t n = 1;
    for (int d : shape_) {
      if (d < 1) throw std::invalid_argument("tensor: dims must be positive");
      n *= static_cast<size_t>(d);
    }
    t.shape = std::move(shape_);
    t.values.assign(n, T(0));
    return t;
  }

  int dim(size_t i) const { return shape.at(i); }
  size_t size() const { return values.size(); }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace dipfuse
