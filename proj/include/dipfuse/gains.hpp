// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>

#include "dipfuse/image.hpp"

namespace dipfuse {

/// Per-pixel sensor gains for the two-source forward model
/// x_i = beta_i * x0 + n_i. Each (beta1, beta2) pair is unit-norm and
/// non-negative, so both maps live in [0,1] and can be saved as images.
struct GainPair {
  Image beta1;
  Image beta2;
  int window = 7;
};

/// Unit dominant eigenvector of the symmetric 2x2 matrix
/// [[m11, m12], [m12, m22]], oriented so the component sum is non-negative.
/// Returns nullopt when the matrix is numerically zero (max |entry| < 1e-12);
/// callers supply their own fallback direction.
std::optional<std::array<double, 2>> dominant_eigvec2(double m11, double m12,
                                                      double m22);

/// Patch-PCA gain estimation: for every pixel, the non-centered second-moment
/// matrix of (x1, x2) over a window x window neighborhood (mirrored at the
/// borders) is formed, and its dominant eigenvector becomes (beta1, beta2).
/// All-dark windows fall back to (1/sqrt(2), 1/sqrt(2)).
GainPair estimate_gains(const Image& x1, const Image& x2, int window);

}  // namespace dipfuse
