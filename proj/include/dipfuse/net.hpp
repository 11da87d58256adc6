// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Encoder-decoder with skip connections, the hourglass used for
// single-instance optimization. Per level: a strided 3x3 convolution and a
// 3x3 refinement on the way down, a 1x1 skip branch at the incoming
// resolution, and on the way up a bilinear 2x upsample concatenated with the
// skip, normalized, then 3x3 + 1x1 convolutions. Every convolution is
// followed by per-channel normalization and LeakyReLU; the head is a 1x1
// convolution into a sigmoid. All shapes are [channels][height][width].
//
// The template parameter selects arithmetic precision: float for production
// runs, double for finite-difference verification.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipfuse/errors.hpp"
#include "dipfuse/ops.hpp"
#include "dipfuse/rng.hpp"
#include "dipfuse/tensor.hpp"

namespace dipfuse {

struct NetworkSpec {
  int depth = 5;
  std::vector<int> down_channels;  // per level; filled by defaults()
  std::vector<int> up_channels;
  std::vector<int> skip_channels;
  int conv_kernel = 3;
  int skip_kernel = 1;
  double leaky_slope = 0.2;
  int out_channels = 1;

  static NetworkSpec defaults(int out_channels) {
    NetworkSpec s;
    s.out_channels = out_channels;
    s.down_channels.assign(s.depth, 128);
    s.up_channels.assign(s.depth, 128);
    s.skip_channels.assign(s.depth, 4);
    return s;
  }

  // Uniform channel widths, handy for tests.
  static NetworkSpec uniform(int depth, int channels, int skip,
                             int out_channels) {
    NetworkSpec s;
    s.depth = depth;
    s.out_channels = out_channels;
    s.down_channels.assign(depth, channels);
    s.up_channels.assign(depth, channels);
    s.skip_channels.assign(depth, skip);
    return s;
  }

  int downsample_factor() const { return 1 << depth; }

  void validate() const {
    if (depth < 1) throw std::invalid_argument("spec: depth must be >= 1");
    if (static_cast<int>(down_channels.size()) != depth ||
        static_cast<int>(up_channels.size()) != depth ||
        static_cast<int>(skip_channels.size()) != depth) {
      throw std::invalid_argument("spec: per-level channel lists must match depth");
    }
    for (int i = 0; i < depth; ++i) {
      if (down_channels[i] < 1 || up_channels[i] < 1 || skip_channels[i] < 1) {
        throw std::invalid_argument("spec: channel counts must be >= 1");
      }
    }
    if (conv_kernel < 1 || conv_kernel % 2 == 0 || skip_kernel < 1 ||
        skip_kernel % 2 == 0) {
      throw std::invalid_argument("spec: kernels must be odd");
    }
    if (out_channels < 1) {
      throw std::invalid_argument("spec: out_channels must be >= 1");
    }
  }
};

template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  size_t size() const { return value.size(); }
};

template <typename T>
struct ParameterStore {
  uint64_t seed = 0;
  std::vector<ParamTensor<T>> tensors;

  size_t total_parameters() const {
    size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  void zero_grads() {
    for (auto& t : tensors) std::fill(t.grad.begin(), t.grad.end(), T(0));
  }
};

namespace netdetail {

enum class Init { conv_weight, zeros, ones };

struct LayoutEntry {
  std::string name;
  std::vector<int> shape;
  Init init;
  int fan_in = 0;  // for conv_weight
};

// Parameter traversal order; also the initialization draw order, so this
// list is part of the reproducibility contract.
inline std::vector<LayoutEntry> build_layout(const NetworkSpec& spec) {
  spec.validate();
  std::vector<LayoutEntry> out;
  const auto conv = [&out](const std::string& prefix, int cin, int cout, int k) {
    out.push_back({prefix + ".weight", {cout, cin, k, k}, Init::conv_weight,
                   cin * k * k});
    out.push_back({prefix + ".bias", {cout}, Init::zeros, 0});
  };
  const auto norm = [&out](const std::string& prefix, int c) {
    out.push_back({prefix + ".scale", {c}, Init::ones, 0});
    out.push_back({prefix + ".shift", {c}, Init::zeros, 0});
  };

  int d_in = spec.out_channels;
  for (int i = 0; i < spec.depth; ++i) {
    const std::string enc = "enc" + std::to_string(i);
    conv(enc + ".skip.conv", d_in, spec.skip_channels[i], spec.skip_kernel);
    norm(enc + ".skip.norm", spec.skip_channels[i]);
    conv(enc + ".down1", d_in, spec.down_channels[i], spec.conv_kernel);
    norm(enc + ".norm1", spec.down_channels[i]);
    conv(enc + ".down2", spec.down_channels[i], spec.down_channels[i],
         spec.conv_kernel);
    norm(enc + ".norm2", spec.down_channels[i]);
    d_in = spec.down_channels[i];
  }
  for (int i = spec.depth - 1; i >= 0; --i) {
    const std::string dec = "dec" + std::to_string(i);
    const int deeper = i == spec.depth - 1 ? spec.down_channels[i]
                                           : spec.up_channels[i + 1];
    const int cat = spec.skip_channels[i] + deeper;
    norm(dec + ".cat_norm", cat);
    conv(dec + ".conv1", cat, spec.up_channels[i], spec.conv_kernel);
    norm(dec + ".norm1", spec.up_channels[i]);
    conv(dec + ".conv2", spec.up_channels[i], spec.up_channels[i], 1);
    norm(dec + ".norm2", spec.up_channels[i]);
  }
  conv("head.conv", spec.up_channels[0], spec.out_channels, 1);
  return out;
}

}  // namespace netdetail

/// Weights uniform on [-b, b] with b = sqrt(1/fan_in); biases and shifts
/// zero, scales one. Fully determined by (spec, seed).
template <typename T>
ParameterStore<T> init_params(const NetworkSpec& spec, uint64_t seed) {
  ParameterStore<T> store;
  store.seed = seed;
  SplitMix64 rng(seed);
  for (auto& e : netdetail::build_layout(spec)) {
    ParamTensor<T> t;
    t.name = std::move(e.name);
    t.shape = std::move(e.shape);
    size_t n = 1;
    for (int d : t.shape) n *= static_cast<size_t>(d);
    t.value.resize(n);
    t.grad.assign(n, T(0));
    switch (e.init) {
      case netdetail::Init::conv_weight: {
        const double bound = std::sqrt(1.0 / e.fan_in);
        for (auto& v : t.value) {
          v = static_cast<T>(rng.uniform(-bound, bound));
        }
        break;
      }
      case netdetail::Init::zeros:
        std::fill(t.value.begin(), t.value.end(), T(0));
        break;
      case netdetail::Init::ones:
        std::fill(t.value.begin(), t.value.end(), T(1));
        break;
    }
    store.tensors.push_back(std::move(t));
  }
  return store;
}

/// Fixed network input: (out_channels, height, width), i.i.d. uniform on
/// [0, 0.1]. Sampled once per run; never perturbed between iterations.
template <typename T>
Tensor<T> make_input(const NetworkSpec& spec, uint64_t seed, int height,
                     int width) {
  spec.validate();
  const int f = spec.downsample_factor();
  if (height < 1 || width < 1 || height % f != 0 || width % f != 0) {
    throw std::invalid_argument("make_input: dims must be positive multiples of " +
                                std::to_string(f));
  }
  Tensor<T> t = Tensor<T>::zeros({spec.out_channels, height, width});
  SplitMix64 rng(seed);
  for (auto& v : t.values) v = static_cast<T>(rng.uniform(0.0, 0.1));
  return t;
}

/// Checkpoint layout: per tensor, little-endian u32 name length, name bytes,
/// u32 rank, u32 dims, then float32 little-endian values. Tensors appear in
/// store order.
template <typename T>
std::vector<uint8_t> serialize_params(const ParameterStore<T>& store) {
  std::vector<uint8_t> out;
  const auto push_u32 = [&out](uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
  };
  for (const auto& t : store.tensors) {
    push_u32(static_cast<uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    push_u32(static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) push_u32(static_cast<uint32_t>(d));
    for (T v : t.value) {
      const float f = static_cast<float>(v);
      uint32_t bits;
      static_assert(sizeof(bits) == sizeof(f));
      std::memcpy(&bits, &f, sizeof(bits));
      push_u32(bits);
    }
  }
  return out;
}

/// Restores values into an identically laid-out store (names and shapes must
/// match record for record). Throws IoError on any mismatch or truncation.
template <typename T>
void deserialize_params(const std::vector<uint8_t>& bytes,
                        ParameterStore<T>& store);

template <typename T>
class Network {
 public:
  Network(const NetworkSpec& spec, ParameterStore<T> store)
      : spec_(spec), store_(std::move(store)) {
    spec_.validate();
    const auto layout = netdetail::build_layout(spec_);
    if (layout.size() != store_.tensors.size()) {
      throw std::invalid_argument("network: parameter store does not match spec");
    }
    for (size_t i = 0; i < layout.size(); ++i) {
      if (store_.tensors[i].name != layout[i].name ||
          store_.tensors[i].shape != layout[i].shape) {
        throw std::invalid_argument("network: parameter store does not match spec");
      }
    }
    build_blocks();
  }

  const NetworkSpec& spec() const { return spec_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  /// Runs the network, keeping the activations needed by backward().
  const Tensor<T>& forward(const Tensor<T>& input);

  /// Exact reverse-mode gradients of the scalar whose output-gradient is
  /// given; overwrites every parameter's grad.
  void backward(const Tensor<T>& grad_output);

  /// Gradient w.r.t. the network input from the last backward() call.
  const std::vector<T>& input_grad() const { return levels_.front().g_x_in; }

 private:
  struct Block {
    int cin = 0, cout = 0, k = 1, stride = 1, pad = 0;
    bool norm_act = true;   // conv -> norm -> LeakyReLU
    bool sigmoid = false;   // head: conv -> sigmoid
    int w_idx = -1, b_idx = -1, gamma_idx = -1, beta_idx = -1;
    // tape
    const T* input = nullptr;
    int hi = 0, wi = 0, ho = 0, wo = 0;
    std::vector<T> padded;
    std::vector<T> conv_out;
    std::vector<double> mean, istd;
    std::vector<T> norm_out;
    std::vector<T> out;
    // backward scratch
    std::vector<T> g_pre, g_conv, g_padded;
  };

  struct NormBlock {
    int c = 0;
    int gamma_idx = -1, beta_idx = -1;
    const T* input = nullptr;
    size_t hw = 0;
    std::vector<double> mean, istd;
    std::vector<T> out;
    std::vector<T> g_in;
  };

  struct Level {
    int h = 0, w = 0;
    int d_in = 0;
    int deeper_ch = 0;
    Block skip, down1, down2;
    NormBlock cat_norm;
    Block up1, up2;
    std::vector<T> x_in;
    std::vector<T> cat;
    std::vector<T> upsampled;
    std::vector<T> g_x_in, g_up1_out, g_cat_out, g_deeper, g_down1_out;
  };

  void build_blocks();
  void block_forward(Block& b, const T* in, int h, int w);
  // Adds the block's input-gradient into g_in_accum (may be null to discard).
  void block_backward(Block& b, const T* g_out, T* g_in_accum);
  void norm_forward(NormBlock& b, const T* in, size_t hw);
  void norm_backward(NormBlock& b, const T* g_out);

  NetworkSpec spec_;
  ParameterStore<T> store_;
  std::vector<Level> levels_;
  Block head_;
  std::vector<T> g_head_in_;
  Tensor<T> output_;
};

// ---------------------------------------------------------------------------
// implementation

template <typename T>
void Network<T>::build_blocks() {
  levels_.assign(spec_.depth, Level{});
  int name_cursor = 0;
  const auto config = [&name_cursor](Block& b, int cin, int cout, int k,
                                     int stride) {
    b.cin = cin;
    b.cout = cout;
    b.k = k;
    b.stride = stride;
    b.pad = (k - 1) / 2;
    b.w_idx = name_cursor++;
    b.b_idx = name_cursor++;
    b.gamma_idx = name_cursor++;
    b.beta_idx = name_cursor++;
  };
  int d_in = spec_.out_channels;
  for (int i = 0; i < spec_.depth; ++i) {
    Level& L = levels_[i];
    L.d_in = d_in;
    config(L.skip, d_in, spec_.skip_channels[i], spec_.skip_kernel, 1);
    config(L.down1, d_in, spec_.down_channels[i], spec_.conv_kernel, 2);
    config(L.down2, spec_.down_channels[i], spec_.down_channels[i],
           spec_.conv_kernel, 1);
    d_in = spec_.down_channels[i];
  }
  for (int i = spec_.depth - 1; i >= 0; --i) {
    Level& L = levels_[i];
    L.deeper_ch = i == spec_.depth - 1 ? spec_.down_channels[i]
                                       : spec_.up_channels[i + 1];
    const int cat = spec_.skip_channels[i] + L.deeper_ch;
    L.cat_norm.c = cat;
    L.cat_norm.gamma_idx = name_cursor++;
    L.cat_norm.beta_idx = name_cursor++;
    config(L.up1, cat, spec_.up_channels[i], spec_.conv_kernel, 1);
    config(L.up2, spec_.up_channels[i], spec_.up_channels[i], 1, 1);
  }
  head_ = Block{};
  head_.cin = spec_.up_channels[0];
  head_.cout = spec_.out_channels;
  head_.k = 1;
  head_.stride = 1;
  head_.pad = 0;
  head_.norm_act = false;
  head_.sigmoid = true;
  head_.w_idx = name_cursor++;
  head_.b_idx = name_cursor++;
}

template <typename T>
void Network<T>::block_forward(Block& b, const T* in, int h, int w) {
  b.input = in;
  b.hi = h;
  b.wi = w;
  const int hp = h + 2 * b.pad, wp = w + 2 * b.pad;
  b.ho = (hp - b.k) / b.stride + 1;
  b.wo = (wp - b.k) / b.stride + 1;
  const T* src = in;
  if (b.pad > 0) {
    b.padded.resize(static_cast<size_t>(b.cin) * hp * wp);
    ops::reflect_pad2d(in, b.cin, h, w, b.pad, b.padded.data());
    src = b.padded.data();
  }
  const size_t n_out = static_cast<size_t>(b.cout) * b.ho * b.wo;
  b.conv_out.resize(n_out);
  ops::conv2d_forward(src, b.cin, hp, wp, store_.tensors[b.w_idx].value.data(),
                      store_.tensors[b.b_idx].value.data(), b.cout, b.k,
                      b.stride, b.conv_out.data());
  if (b.norm_act) {
    b.mean.resize(b.cout);
    b.istd.resize(b.cout);
    b.norm_out.resize(n_out);
    ops::channel_norm_forward(b.conv_out.data(), b.cout,
                              static_cast<size_t>(b.ho) * b.wo,
                              store_.tensors[b.gamma_idx].value.data(),
                              store_.tensors[b.beta_idx].value.data(),
                              b.norm_out.data(), b.mean.data(), b.istd.data());
    b.out.resize(n_out);
    ops::leaky_relu_forward(b.norm_out.data(), n_out,
                            static_cast<T>(spec_.leaky_slope), b.out.data());
  } else if (b.sigmoid) {
    b.out.resize(n_out);
    ops::sigmoid_forward(b.conv_out.data(), n_out, b.out.data());
  } else {
    b.out = b.conv_out;
  }
}

template <typename T>
void Network<T>::block_backward(Block& b, const T* g_out, T* g_in_accum) {
  const size_t n_out = static_cast<size_t>(b.cout) * b.ho * b.wo;
  const T* g_conv_src = g_out;
  if (b.norm_act) {
    b.g_pre.resize(n_out);
    ops::leaky_relu_backward(b.norm_out.data(), g_out, n_out,
                             static_cast<T>(spec_.leaky_slope), b.g_pre.data());
    b.g_conv.resize(n_out);
    ops::channel_norm_backward(b.conv_out.data(), b.mean.data(), b.istd.data(),
                               store_.tensors[b.gamma_idx].value.data(),
                               b.g_pre.data(), b.cout,
                               static_cast<size_t>(b.ho) * b.wo,
                               b.g_conv.data(),
                               store_.tensors[b.gamma_idx].grad.data(),
                               store_.tensors[b.beta_idx].grad.data());
    g_conv_src = b.g_conv.data();
  } else if (b.sigmoid) {
    b.g_conv.resize(n_out);
    ops::sigmoid_backward(b.out.data(), g_out, n_out, b.g_conv.data());
    g_conv_src = b.g_conv.data();
  }
  const int hp = b.hi + 2 * b.pad, wp = b.wi + 2 * b.pad;
  const T* src = b.pad > 0 ? b.padded.data() : b.input;
  b.g_padded.resize(static_cast<size_t>(b.cin) * hp * wp);
  ops::conv2d_backward(src, b.cin, hp, wp,
                       store_.tensors[b.w_idx].value.data(), b.cout, b.k,
                       b.stride, g_conv_src,
                       store_.tensors[b.w_idx].grad.data(),
                       store_.tensors[b.b_idx].grad.data(), b.g_padded.data());
  if (g_in_accum != nullptr) {
    if (b.pad > 0) {
      ops::reflect_pad2d_backward(b.g_padded.data(), b.cin, b.hi, b.wi, b.pad,
                                  g_in_accum);
    } else {
      for (size_t i = 0; i < b.g_padded.size(); ++i) {
        g_in_accum[i] += b.g_padded[i];
      }
    }
  }
}

template <typename T>
void Network<T>::norm_forward(NormBlock& b, const T* in, size_t hw) {
  b.input = in;
  b.hw = hw;
  b.mean.resize(b.c);
  b.istd.resize(b.c);
  b.out.resize(b.c * hw);
  ops::channel_norm_forward(in, b.c, hw,
                            store_.tensors[b.gamma_idx].value.data(),
                            store_.tensors[b.beta_idx].value.data(),
                            b.out.data(), b.mean.data(), b.istd.data());
}

template <typename T>
void Network<T>::norm_backward(NormBlock& b, const T* g_out) {
  b.g_in.resize(b.c * b.hw);
  ops::channel_norm_backward(b.input, b.mean.data(), b.istd.data(),
                             store_.tensors[b.gamma_idx].value.data(), g_out,
                             b.c, b.hw, b.g_in.data(),
                             store_.tensors[b.gamma_idx].grad.data(),
                             store_.tensors[b.beta_idx].grad.data());
}

template <typename T>
const Tensor<T>& Network<T>::forward(const Tensor<T>& input) {
  if (input.shape.size() != 3 || input.shape[0] != spec_.out_channels) {
    throw std::invalid_argument("forward: input must be (out_channels, h, w)");
  }
  const int H = input.shape[1], W = input.shape[2];
  const int f = spec_.downsample_factor();
  if (H % f != 0 || W % f != 0) {
    throw std::invalid_argument("forward: dims must be multiples of " +
                                std::to_string(f));
  }

  const T* cur = input.values.data();
  int h = H, w = W, c = spec_.out_channels;
  for (int i = 0; i < spec_.depth; ++i) {
    Level& L = levels_[i];
    L.h = h;
    L.w = w;
    L.x_in.assign(cur, cur + static_cast<size_t>(c) * h * w);
    block_forward(L.skip, L.x_in.data(), h, w);
    block_forward(L.down1, L.x_in.data(), h, w);
    block_forward(L.down2, L.down1.out.data(), h / 2, w / 2);
    cur = L.down2.out.data();
    h /= 2;
    w /= 2;
    c = spec_.down_channels[i];
  }

  const T* deeper = cur;
  for (int i = spec_.depth - 1; i >= 0; --i) {
    Level& L = levels_[i];
    const size_t hw = static_cast<size_t>(L.h) * L.w;
    L.upsampled.resize(static_cast<size_t>(L.deeper_ch) * hw);
    ops::upsample2x_forward(deeper, L.deeper_ch, L.h / 2, L.w / 2,
                            L.upsampled.data());
    const size_t skip_n = static_cast<size_t>(spec_.skip_channels[i]) * hw;
    L.cat.resize(skip_n + L.upsampled.size());
    std::copy(L.skip.out.begin(), L.skip.out.end(), L.cat.begin());
    std::copy(L.upsampled.begin(), L.upsampled.end(), L.cat.begin() + skip_n);
    norm_forward(L.cat_norm, L.cat.data(), hw);
    block_forward(L.up1, L.cat_norm.out.data(), L.h, L.w);
    block_forward(L.up2, L.up1.out.data(), L.h, L.w);
    deeper = L.up2.out.data();
  }

  block_forward(head_, levels_[0].up2.out.data(), H, W);
  output_.shape = {spec_.out_channels, H, W};
  output_.values = head_.out;
  return output_;
}

template <typename T>
void Network<T>::backward(const Tensor<T>& grad_output) {
  if (grad_output.shape != output_.shape) {
    throw std::invalid_argument("backward: gradient shape mismatch");
  }
  store_.zero_grads();

  g_head_in_.assign(levels_[0].up2.out.size(), T(0));
  head_.input = levels_[0].up2.out.data();  // re-borrow for clarity
  block_backward(head_, grad_output.values.data(), g_head_in_.data());

  // Decoder sweep, finest level first; each pass hands the gradient of the
  // next-deeper decoder output onward and banks the skip-branch share of the
  // level-input gradient.
  const T* g_dec = g_head_in_.data();
  for (int i = 0; i < spec_.depth; ++i) {
    Level& L = levels_[i];
    const size_t hw = static_cast<size_t>(L.h) * L.w;
    L.g_up1_out.assign(L.up1.out.size(), T(0));
    block_backward(L.up2, g_dec, L.g_up1_out.data());
    L.g_cat_out.assign(L.cat.size(), T(0));
    block_backward(L.up1, L.g_up1_out.data(), L.g_cat_out.data());
    norm_backward(L.cat_norm, L.g_cat_out.data());
    const size_t skip_n = static_cast<size_t>(spec_.skip_channels[i]) * hw;
    L.g_deeper.resize(static_cast<size_t>(L.deeper_ch) * hw / 4);
    ops::upsample2x_backward(L.cat_norm.g_in.data() + skip_n, L.deeper_ch,
                             L.h / 2, L.w / 2, L.g_deeper.data());
    L.g_x_in.assign(L.x_in.size(), T(0));
    block_backward(L.skip, L.cat_norm.g_in.data(), L.g_x_in.data());
    g_dec = L.g_deeper.data();
  }

  // Encoder sweep from the bottom; g_dec is now the gradient w.r.t. the
  // deepest down2 output.
  const T* g_down2_out = g_dec;
  for (int i = spec_.depth - 1; i >= 0; --i) {
    Level& L = levels_[i];
    L.g_down1_out.assign(L.down1.out.size(), T(0));
    block_backward(L.down2, g_down2_out, L.g_down1_out.data());
    block_backward(L.down1, L.g_down1_out.data(), L.g_x_in.data());
    if (i > 0) g_down2_out = L.g_x_in.data();
  }
}

template <typename T>
void deserialize_params(const std::vector<uint8_t>& bytes,
                        ParameterStore<T>& store) {
  size_t off = 0;
  const auto read_u32 = [&bytes, &off]() -> uint32_t {
    if (bytes.size() - off < 4) throw IoError("checkpoint: truncated");
    const uint32_t v = static_cast<uint32_t>(bytes[off]) |
                       (static_cast<uint32_t>(bytes[off + 1]) << 8) |
                       (static_cast<uint32_t>(bytes[off + 2]) << 16) |
                       (static_cast<uint32_t>(bytes[off + 3]) << 24);
    off += 4;
    return v;
  };
  for (auto& t : store.tensors) {
    const uint32_t name_len = read_u32();
    if (bytes.size() - off < name_len) throw IoError("checkpoint: truncated");
    const std::string name(bytes.begin() + off, bytes.begin() + off + name_len);
    off += name_len;
    if (name != t.name) throw IoError("checkpoint: tensor name mismatch: " + name);
    const uint32_t rank = read_u32();
    if (rank != t.shape.size()) throw IoError("checkpoint: rank mismatch");
    for (uint32_t d = 0; d < rank; ++d) {
      if (read_u32() != static_cast<uint32_t>(t.shape[d])) {
        throw IoError("checkpoint: shape mismatch in " + name);
      }
    }
    for (auto& v : t.value) {
      const uint32_t bits = read_u32();
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      v = static_cast<T>(f);
    }
  }
  if (off != bytes.size()) throw IoError("checkpoint: trailing bytes");
}

}  // namespace dipfuse
