// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dipfuse {

// File or byte-stream problems: unreadable files, malformed headers,
// truncated data, unsupported encodings.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimization produced a non-finite loss. Carries enough context to
// reproduce the failing run.
struct DivergedError : std::runtime_error {
  DivergedError(uint64_t seed_, int iteration_, double loss_)
      : std::runtime_error("optimization diverged at iteration " +
                           std::to_string(iteration_) + " (seed " +
                           std::to_string(seed_) + ")"),
        seed(seed_),
        iteration(iteration_),
        loss(loss_) {}
  uint64_t seed;
  int iteration;
  double loss;
};

}  // namespace dipfuse
