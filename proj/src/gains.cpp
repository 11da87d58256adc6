// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#include "dipfuse/gains.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dipfuse/reflect.hpp"

namespace dipfuse {

std::optional<std::array<double, 2>> dominant_eigvec2(double m11, double m12,
                                                      double m22) {
  const double scale = std::max({std::abs(m11), std::abs(m12), std::abs(m22)});
  if (scale < 1e-12) return std::nullopt;

  const double half_tr = 0.5 * (m11 + m22);
  const double half_diff = 0.5 * (m11 - m22);
  const double lmax = half_tr + std::sqrt(half_diff * half_diff + m12 * m12);

  // Two algebraically equivalent eigenvector candidates; take the better
  // conditioned one. Both vanish only for multiples of the identity.
  const double u0 = m12, u1 = lmax - m11;
  const double w0 = lmax - m22, w1 = m12;
  const double nu = u0 * u0 + u1 * u1;
  const double nw = w0 * w0 + w1 * w1;
  double v0, v1;
  if (nu >= nw) {
    v0 = u0;
    v1 = u1;
  } else {
    v0 = w0;
    v1 = w1;
  }
  double norm = std::sqrt(v0 * v0 + v1 * v1);
  if (norm == 0.0) {
    // Isotropic matrix: every direction is dominant. The diagonal keeps the
    // choice invariant under swapping the two coordinates.
    const double r = std::sqrt(0.5);
    return std::array<double, 2>{r, r};
  }
  v0 /= norm;
  v1 /= norm;
  if (v0 + v1 < 0.0) {
    v0 = -v0;
    v1 = -v1;
  }
  // +0.0 normalizes any -0.0 left by the flip.
  return std::array<double, 2>{v0 + 0.0, v1 + 0.0};
}

GainPair estimate_gains(const Image& x1, const Image& x2, int window) {
  if (x1.width != x2.width || x1.height != x2.height) {
    throw std::invalid_argument("estimate_gains: source dimensions differ");
  }
  if (window < 1 || window % 2 == 0) {
    throw std::invalid_argument("estimate_gains: window must be odd and >= 1");
  }
  const int w = x1.width, h = x1.height;
  const int pad = window / 2;
  const int wp = w + 2 * pad, hp = h + 2 * pad;

  // Box sums of the three products over mirrored-padded planes, via summed
  // area tables. s(y, x) holds the inclusive prefix sum up to (y-1, x-1).
  const size_t sw = static_cast<size_t>(wp) + 1;
  std::vector<double> s11(sw * (hp + 1), 0.0), s12(sw * (hp + 1), 0.0),
      s22(sw * (hp + 1), 0.0);
  for (int y = 0; y < hp; ++y) {
    const int sy = reflect_index(y - pad, h);
    double r11 = 0.0, r12 = 0.0, r22 = 0.0;
    for (int x = 0; x < wp; ++x) {
      const int sx = reflect_index(x - pad, w);
      const double a = x1.at(sx, sy);
      const double b = x2.at(sx, sy);
      r11 += a * a;
      r12 += a * b;
      r22 += b * b;
      const size_t idx = (y + 1) * sw + (x + 1);
      s11[idx] = s11[idx - sw] + r11;
      s12[idx] = s12[idx - sw] + r12;
      s22[idx] = s22[idx - sw] + r22;
    }
  }
  const auto box = [&](const std::vector<double>& s, int x, int y) {
    // Window with top-left (x, y) in padded coordinates, size window^2.
    const size_t y0 = static_cast<size_t>(y), y1 = y0 + window;
    const size_t x0 = static_cast<size_t>(x), x1 = x0 + window;
    return s[y1 * sw + x1] - s[y0 * sw + x1] - s[y1 * sw + x0] + s[y0 * sw + x0];
  };

  GainPair gains;
  gains.window = window;
  gains.beta1 = make_image(w, h);
  gains.beta2 = make_image(w, h);
  const double inv_k = 1.0 / (static_cast<double>(window) * window);
  const double fallback = std::sqrt(0.5);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m11 = box(s11, x, y) * inv_k;
      const double m12 = box(s12, x, y) * inv_k;
      const double m22 = box(s22, x, y) * inv_k;
      const auto v = dominant_eigvec2(m11, m12, m22);
      if (v) {
        // The prefix-sum route can leave moments a hair off PSD; gains are
        // non-negative by contract, so snuff out any sub-epsilon negatives.
        gains.beta1.at(x, y) = std::max((*v)[0], 0.0);
        gains.beta2.at(x, y) = std::max((*v)[1], 0.0);
      } else {
        gains.beta1.at(x, y) = fallback;
        gains.beta2.at(x, y) = fallback;
      }
    }
  }
  return gains;
}

}  // namespace dipfuse
