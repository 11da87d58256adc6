// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#include "dipfuse/fusion.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "dipfuse/adam.hpp"
#include "dipfuse/errors.hpp"
#include "dipfuse/net.hpp"

namespace dipfuse {

namespace {

// Decouples the input-noise stream from the weight-init stream.
constexpr uint64_t kInputSeedSalt = 0x9E3779B97F4A7C15ULL;

template <typename T>
void check_loss_dims(const Tensor<T>& output, const Image& x1, const Image& x2,
                     const GainPair& gains) {
  if (output.shape.size() != 3) {
    throw std::invalid_argument("fusion_loss: output must be (n, h, w)");
  }
  const int h = output.shape[1], w = output.shape[2];
  const auto same = [&](const Image& img) {
    return img.width == w && img.height == h;
  };
  if (!same(x1) || !same(x2) || !same(gains.beta1) || !same(gains.beta2)) {
    throw std::invalid_argument("fusion_loss: dimension mismatch");
  }
}

}  // namespace

void FusionConfig::validate() const {
  if (channels < 1) throw std::invalid_argument("config: channels must be >= 1");
  if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (gain_window < 1 || gain_window % 2 == 0) {
    throw std::invalid_argument("config: gain window must be odd and >= 1");
  }
  if (snapshot_stride < 1) {
    throw std::invalid_argument("config: snapshot stride must be >= 1");
  }
}

template <typename T>
double fusion_loss(const Tensor<T>& output, const Image& x1, const Image& x2,
                   const GainPair& gains) {
  check_loss_dims(output, x1, x2, gains);
  const int n = output.shape[0];
  const size_t hw = x1.size();
  double loss = 0.0;
  for (int c = 0; c < n; ++c) {
    const T* out = output.values.data() + static_cast<size_t>(c) * hw;
    for (size_t p = 0; p < hw; ++p) {
      const double o = static_cast<double>(out[p]);
      const double r1 = x1.pixels[p] - gains.beta1.pixels[p] * o;
      const double r2 = x2.pixels[p] - gains.beta2.pixels[p] * o;
      loss += r1 * r1 + r2 * r2;
    }
  }
  return loss;
}

template <typename T>
Tensor<T> fusion_loss_grad(const Tensor<T>& output, const Image& x1,
                           const Image& x2, const GainPair& gains) {
  check_loss_dims(output, x1, x2, gains);
  const int n = output.shape[0];
  const size_t hw = x1.size();
  Tensor<T> grad = Tensor<T>::zeros(output.shape);
  for (int c = 0; c < n; ++c) {
    const T* out = output.values.data() + static_cast<size_t>(c) * hw;
    T* g = grad.values.data() + static_cast<size_t>(c) * hw;
    for (size_t p = 0; p < hw; ++p) {
      const double o = static_cast<double>(out[p]);
      const double b1 = gains.beta1.pixels[p];
      const double b2 = gains.beta2.pixels[p];
      g[p] = static_cast<T>(2.0 * (b1 * (b1 * o - x1.pixels[p]) +
                                   b2 * (b2 * o - x2.pixels[p])));
    }
  }
  return grad;
}

template <typename T>
Image average_channels(const Tensor<T>& output) {
  if (output.shape.size() != 3) {
    throw std::invalid_argument("average_channels: output must be (n, h, w)");
  }
  const int n = output.shape[0], h = output.shape[1], w = output.shape[2];
  const size_t hw = static_cast<size_t>(h) * w;
  Image img = make_image(w, h);
  for (int c = 0; c < n; ++c) {
    const T* src = output.values.data() + static_cast<size_t>(c) * hw;
    for (size_t p = 0; p < hw; ++p) {
      img.pixels[p] += static_cast<double>(src[p]);
    }
  }
  const double inv = 1.0 / n;
  for (auto& p : img.pixels) {
    p *= inv;
    p = p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
  }
  return img;
}

FusionResult run_fusion(const Image& x1, const Image& x2,
                        const FusionConfig& cfg) {
  cfg.validate();
  if (x1.width != x2.width || x1.height != x2.height) {
    throw std::invalid_argument("run_fusion: source dimensions differ");
  }

  const NetworkSpec spec = NetworkSpec::defaults(cfg.channels);
  const int multiple = spec.downsample_factor();
  auto [x1p, rec] = pad_reflect_to_multiple(x1, multiple);
  Image x2p = pad_reflect_to_multiple(x2, multiple).first;

  // Gains on the padded sources: inside the original region this matches
  // estimating on the originals, because window reflection and pad
  // reflection see the same mirrored pixels.
  const GainPair gains_padded = estimate_gains(x1p, x2p, cfg.gain_window);

  Network<float> net(spec, init_params<float>(spec, cfg.seed));
  const TensorF input = make_input<float>(spec, cfg.seed ^ kInputSeedSalt,
                                          x1p.height, x1p.width);
  AdamState<float> adam = make_adam(net.params(), cfg.lr);

  FusionResult result;
  result.config = cfg;
  result.loss_curve.reserve(cfg.iterations);
  double best = std::numeric_limits<double>::infinity();
  int best_iter = -1;
  std::vector<float> best_output;

  for (int t = 0; t < cfg.iterations; ++t) {
    const TensorF& out = net.forward(input);
    const double loss = fusion_loss(out, x1p, x2p, gains_padded);
    if (!std::isfinite(loss)) throw DivergedError(cfg.seed, t, loss);
    result.loss_curve.push_back(loss);
    if (t % cfg.snapshot_stride == 0 && loss < best) {
      best = loss;
      best_iter = t;
      best_output = out.values;
    }
    net.backward(fusion_loss_grad(out, x1p, x2p, gains_padded));
    adam_step(net.params(), adam);
  }

  TensorF best_tensor;
  best_tensor.shape = {cfg.channels, x1p.height, x1p.width};
  best_tensor.values = std::move(best_output);
  result.fused = crop_to(average_channels(best_tensor), rec);
  result.best_loss = best;
  result.best_iteration = best_iter;
  result.gains.window = cfg.gain_window;
  result.gains.beta1 = crop_to(gains_padded.beta1, rec);
  result.gains.beta2 = crop_to(gains_padded.beta2, rec);
  return result;
}

std::string loss_curve_csv(const std::vector<double>& curve) {
  std::string out = "iteration,loss\n";
  char buf[64];
  for (size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, curve[i]);
    out += buf;
  }
  return out;
}

template double fusion_loss<float>(const TensorF&, const Image&, const Image&,
                                   const GainPair&);
template double fusion_loss<double>(const TensorD&, const Image&, const Image&,
                                    const GainPair&);
template TensorF fusion_loss_grad<float>(const TensorF&, const Image&,
                                         const Image&, const GainPair&);
template TensorD fusion_loss_grad<double>(const TensorD&, const Image&,
                                          const Image&, const GainPair&);
template Image average_channels<float>(const TensorF&);
template Image average_channels<double>(const TensorD&);

}  // namespace dipfuse
