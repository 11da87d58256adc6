// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic grayscale scenes for fusion tests: seeded random
// fields plus structured content, and degraded source pairs that mimic
// multi-focus, CT/MR, and IR/visible acquisitions.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "dipfuse/image.hpp"
#include "dipfuse/rng.hpp"

namespace synthetic {

inline dipfuse::Image gaussian_blob(int w, int h, double peak, double cx,
                                    double cy, double sigma) {
  dipfuse::Image img = dipfuse::make_image(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - cx, dy = y - cy;
      img.at(x, y) = peak * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    }
  }
  return img;
}

// Separable Gaussian blur with edge clamping; test-only quality.
inline dipfuse::Image blur(const dipfuse::Image& img, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> k(2 * r + 1);
  double sum = 0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
    sum += k[i + r];
  }
  for (auto& v : k) v /= sum;
  dipfuse::Image tmp = dipfuse::make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        acc += k[i + r] * img.at(std::clamp(x + i, 0, img.width - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  dipfuse::Image out = dipfuse::make_image(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, img.height - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline dipfuse::Image random_field(int w, int h, uint64_t seed) {
  dipfuse::SplitMix64 rng(seed);
  dipfuse::Image img = dipfuse::make_image(w, h);
  for (auto& p : img.pixels) p = rng.next_double();
  return img;
}

// Smooth structured scene: blurred noise plus a few blobs and a gradient.
inline dipfuse::Image scene(int w, int h, uint64_t seed) {
  dipfuse::SplitMix64 rng(seed);
  dipfuse::Image img = blur(random_field(w, h, rng.next_u64()), 3.0);
  for (int b = 0; b < 4; ++b) {
    const double cx = rng.uniform(0.2, 0.8) * w;
    const double cy = rng.uniform(0.2, 0.8) * h;
    const double sg = rng.uniform(0.05, 0.12) * w;
    const double peak = rng.uniform(0.3, 0.6);
    const auto blob = gaussian_blob(w, h, peak, cx, cy, sg);
    for (size_t i = 0; i < img.size(); ++i) img.pixels[i] += blob.pixels[i];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y) += 0.15 * x / w + 0.1 * y / h;
    }
  }
  double lo = 1e300, hi = -1e300;
  for (double p : img.pixels) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  for (auto& p : img.pixels) p = 0.05 + 0.9 * (p - lo) / (hi - lo);
  return img;
}

enum class PairKind { multifocus, ct_mr, ir_vis };

// Two degraded views of complementary content, in the style of the named
// acquisition pair.
inline std::pair<dipfuse::Image, dipfuse::Image> source_pair(PairKind kind,
                                                             int w, int h,
                                                             uint64_t seed) {
  using dipfuse::Image;
  switch (kind) {
    case PairKind::multifocus: {
      const Image sharp = scene(w, h, seed);
      const Image soft = blur(sharp, 2.5);
      Image a = sharp, b = sharp;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double t = 1.0 / (1.0 + std::exp(-(x - w / 2.0) / 2.0));
          a.at(x, y) = (1 - t) * sharp.at(x, y) + t * soft.at(x, y);
          b.at(x, y) = t * sharp.at(x, y) + (1 - t) * soft.at(x, y);
        }
      }
      return {a, b};
    }
    case PairKind::ct_mr: {
      // "CT": a bright skull-like ring, dark interior. "MR": soft interior
      // detail, dark ring.
      dipfuse::SplitMix64 rng(seed);
      const Image tissue = scene(w, h, rng.next_u64());
      Image ct = dipfuse::make_image(w, h);
      Image mr = dipfuse::make_image(w, h);
      const double cx = w / 2.0, cy = h / 2.0;
      const double r_out = 0.45 * std::min(w, h);
      const double r_in = 0.38 * std::min(w, h);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double r = std::hypot(x - cx, y - cy);
          const double ring =
              1.0 / (1.0 + std::exp((r - r_out) / 1.5)) -
              1.0 / (1.0 + std::exp((r - r_in) / 1.5));
          const double inside = 1.0 / (1.0 + std::exp((r - r_in) / 1.5));
          ct.at(x, y) = std::clamp(0.85 * ring + 0.12 * inside * tissue.at(x, y), 0.0, 1.0);
          mr.at(x, y) = std::clamp(0.9 * inside * tissue.at(x, y) + 0.05 * ring, 0.0, 1.0);
        }
      }
      return {ct, mr};
    }
    case PairKind::ir_vis: {
      dipfuse::SplitMix64 rng(seed);
      const Image vis = scene(w, h, rng.next_u64());
      Image ir = blur(random_field(w, h, rng.next_u64()), 6.0);
      double lo = 1e300, hi = -1e300;
      for (double p : ir.pixels) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
      for (auto& p : ir.pixels) p = (p - lo) / (hi - lo);
      const auto hot = gaussian_blob(w, h, 0.7, 0.3 * w, 0.6 * h, 0.1 * w);
      for (size_t i = 0; i < ir.size(); ++i) {
        ir.pixels[i] = std::clamp(0.3 * ir.pixels[i] + hot.pixels[i] + 0.1, 0.0, 1.0);
      }
      return {vis, ir};
    }
  }
  return {dipfuse::make_image(w, h), dipfuse::make_image(w, h)};
}

inline double psnr(const dipfuse::Image& a, const dipfuse::Image& b) {
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  return mse == 0.0 ? 1e9 : 10.0 * std::log10(1.0 / mse);
}

}  // namespace synthetic
