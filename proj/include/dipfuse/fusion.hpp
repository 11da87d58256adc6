// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dipfuse/gains.hpp"
#include "dipfuse/image.hpp"
#include "dipfuse/tensor.hpp"

namespace dipfuse {

struct FusionConfig {
  int channels = 10;
  int iterations = 2000;
  double lr = 0.01;
  uint64_t seed = 0;
  int gain_window = 7;
  int snapshot_stride = 1;  // best-iterate candidates every k-th iteration

  void validate() const;
};

struct FusionResult {
  Image fused;
  double best_loss = 0.0;
  int best_iteration = 0;  // zero-based
  std::vector<double> loss_curve;
  GainPair gains;
  FusionConfig config;
};

/// Data-fit residual, summed over channels and pixels:
///   L = sum_c [ ||x1 - b1 .* out_c||^2 + ||x2 - b2 .* out_c||^2 ]
/// Sources are implicitly replicated across the output channels.
template <typename T>
double fusion_loss(const Tensor<T>& output, const Image& x1, const Image& x2,
                   const GainPair& gains);

/// dL/d(output), same shape as output.
template <typename T>
Tensor<T> fusion_loss_grad(const Tensor<T>& output, const Image& x1,
                           const Image& x2, const GainPair& gains);

/// Channel mean, clamped to [0,1].
template <typename T>
Image average_channels(const Tensor<T>& output);

/// The whole pipeline: estimate gains, optimize the network against the
/// residual, keep the minimum-loss iterate, average its channels, crop back
/// to the source dimensions. Deterministic given (sources, config).
/// Throws DivergedError if the loss turns non-finite.
FusionResult run_fusion(const Image& x1, const Image& x2,
                        const FusionConfig& cfg);

/// "iteration,loss" rows, loss printed with 17 significant digits.
std::string loss_curve_csv(const std::vector<double>& curve);

}  // namespace dipfuse
