// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// The operator set the network needs, each paired with its exact adjoint.
// Layout is planar: tensors are [channels][height][width], row-major.
// Reductions (normalization statistics, weight gradients) accumulate in
// double with a fixed lane structure and order, and parallel loops only
// split whole output planes, so results do not depend on the worker count.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dipfuse/reflect.hpp"
#include "dipfuse/thread_pool.hpp"

#if defined(__GNUC__) || defined(__clang__)
#define DIPFUSE_RESTRICT __restrict__
#else
#define DIPFUSE_RESTRICT
#endif

namespace dipfuse::ops {

// ---------------------------------------------------------------------------
// Reflection padding

template <typename T>
void reflect_pad2d(const T* in, int c, int h, int w, int pad, T* out) {
  const int hp = h + 2 * pad, wp = w + 2 * pad;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = in + static_cast<size_t>(ch) * h * w;
    T* dst = out + static_cast<size_t>(ch) * hp * wp;
    for (int y = 0; y < hp; ++y) {
      const T* row = src + static_cast<size_t>(reflect_index(y - pad, h)) * w;
      for (int x = 0; x < wp; ++x) {
        dst[static_cast<size_t>(y) * wp + x] = row[reflect_index(x - pad, w)];
      }
    }
  }
}

// Adjoint: fold padded-border gradients back onto their source pixels.
template <typename T>
void reflect_pad2d_backward(const T* gpad, int c, int h, int w, int pad,
                            T* gin_accum) {
  const int hp = h + 2 * pad, wp = w + 2 * pad;
  for (int ch = 0; ch < c; ++ch) {
    const T* gsrc = gpad + static_cast<size_t>(ch) * hp * wp;
    T* gdst = gin_accum + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < hp; ++y) {
      const int sy = reflect_index(y - pad, h);
      for (int x = 0; x < wp; ++x) {
        gdst[static_cast<size_t>(sy) * w + reflect_index(x - pad, w)] +=
            gsrc[static_cast<size_t>(y) * wp + x];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// 2D convolution on a pre-padded input
//
// weights: [cout][cin][k][k]; in: [cin][hp][wp]; out: [cout][ho][wo]
// with ho = (hp - k) / stride + 1.

namespace detail {

// One output row: acc[x] += the nine 3x3 taps. Row-buffered accumulation
// keeps the read-modify-write in L1 and lets the x loop vectorize.
template <typename T>
inline void taps_3x3_row(const T* DIPFUSE_RESTRICT r0,
                         const T* DIPFUSE_RESTRICT r1,
                         const T* DIPFUSE_RESTRICT r2,
                         const T* DIPFUSE_RESTRICT wk, int wo,
                         T* DIPFUSE_RESTRICT acc) {
  const T w0 = wk[0], w1 = wk[1], w2 = wk[2];
  const T w3 = wk[3], w4 = wk[4], w5 = wk[5];
  const T w6 = wk[6], w7 = wk[7], w8 = wk[8];
  for (int x = 0; x < wo; ++x) {
    acc[x] += w0 * r0[x] + w1 * r0[x + 1] + w2 * r0[x + 2] +
              w3 * r1[x] + w4 * r1[x + 1] + w5 * r1[x + 2] +
              w6 * r2[x] + w7 * r2[x + 1] + w8 * r2[x + 2];
  }
}

template <typename T>
inline void taps_generic_row(const T* in, int wp, const T* wk, int k,
                             int stride, int y, int wo, T* acc) {
  for (int ky = 0; ky < k; ++ky) {
    const T* row = in + static_cast<size_t>(y * stride + ky) * wp;
    for (int kx = 0; kx < k; ++kx) {
      const T w = wk[ky * k + kx];
      if (stride == 1) {
        const T* DIPFUSE_RESTRICT r = row + kx;
        for (int x = 0; x < wo; ++x) acc[x] += w * r[x];
      } else {
        for (int x = 0; x < wo; ++x) {
          acc[x] += w * row[static_cast<size_t>(x) * stride + kx];
        }
      }
    }
  }
}

// Plane reductions with a fixed lane split: vectorizable without changing
// the (schedule-independent) accumulation order. The tail (< lane count)
// masks its lane index; it never wraps in practice.
template <typename T>
inline double plane_sum_lanes(const T* a, size_t n) {
  double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  size_t x = 0;
  for (; x + 8 <= n; x += 8) {
    for (int l = 0; l < 8; ++l) lanes[l] += static_cast<double>(a[x + l]);
  }
  for (int l = 0; x < n; ++x, ++l) lanes[l & 7] += static_cast<double>(a[x]);
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
         ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

// All nine 3x3 tap-dots of the gradient plane against the input in one pass,
// so both planes stream through cache once per (oc, ic) pair instead of
// nine times. Same fixed lane structure as the single-tap variant.
template <typename T>
inline void nine_dots_3x3_s1(const T* g, int wo, int ho, const T* b, int wp,
                             T out[9]) {
  T lanes[9][16] = {};
  for (int y = 0; y < ho; ++y) {
    const T* DIPFUSE_RESTRICT ga = g + static_cast<size_t>(y) * wo;
    for (int ky = 0; ky < 3; ++ky) {
      const T* DIPFUSE_RESTRICT row = b + static_cast<size_t>(y + ky) * wp;
      T* DIPFUSE_RESTRICT l0 = lanes[3 * ky + 0];
      T* DIPFUSE_RESTRICT l1 = lanes[3 * ky + 1];
      T* DIPFUSE_RESTRICT l2 = lanes[3 * ky + 2];
      int x = 0;
      for (; x + 16 <= wo; x += 16) {
        for (int l = 0; l < 16; ++l) {
          const T gv = ga[x + l];
          l0[l] += gv * row[x + l];
          l1[l] += gv * row[x + l + 1];
          l2[l] += gv * row[x + l + 2];
        }
      }
      for (size_t l = 0; x < wo; ++x, ++l) {
        const T gv = ga[x];
        l0[l & 15] += gv * row[x];
        l1[l & 15] += gv * row[x + 1];
        l2[l & 15] += gv * row[x + 2];
      }
    }
  }
  for (int j = 0; j < 9; ++j) {
    T total = T(0);
    for (int l = 0; l < 16; ++l) total += lanes[j][l];
    out[j] = total;
  }
}

// Dot of the dense gradient plane with a tap-shifted view of the input.
// Accumulates in T (16 lanes): weight gradients tolerate working precision,
// and the 64-bit network mode gets double lanes by instantiation.
template <typename T>
inline T shifted_dot_lanes(const T* g, int wo, int ho, const T* b, int wp,
                           int stride, int ky, int kx) {
  T lanes[16] = {};
  for (int y = 0; y < ho; ++y) {
    const T* DIPFUSE_RESTRICT ga = g + static_cast<size_t>(y) * wo;
    const T* DIPFUSE_RESTRICT row =
        b + static_cast<size_t>(y * stride + ky) * wp + kx;
    int x = 0;
    if (stride == 1) {
      for (; x + 16 <= wo; x += 16) {
        for (int l = 0; l < 16; ++l) lanes[l] += ga[x + l] * row[x + l];
      }
      for (int l = 0; x < wo; ++x, ++l) {
        lanes[l & 15] += ga[x] * row[x];
      }
    } else {
      for (; x + 16 <= wo; x += 16) {
        for (int l = 0; l < 16; ++l) {
          lanes[l] += ga[x + l] * row[static_cast<size_t>(x + l) * stride];
        }
      }
      for (int l = 0; x < wo; ++x, ++l) {
        lanes[l & 15] += ga[x] * row[static_cast<size_t>(x) * stride];
      }
    }
  }
  T total = T(0);
  for (int l = 0; l < 16; ++l) total += lanes[l];
  return total;
}

}  // namespace detail

template <typename T>
void conv2d_forward(const T* in, int cin, int hp, int wp, const T* weights,
                    const T* bias, int cout, int k, int stride, T* out) {
  const int ho = (hp - k) / stride + 1;
  const int wo = (wp - k) / stride + 1;
  const size_t plane_in = static_cast<size_t>(hp) * wp;
  const size_t plane_out = static_cast<size_t>(ho) * wo;
  const bool parallel =
      static_cast<size_t>(cout) * cin * plane_out * k * k > (1u << 16);
  parallel_for(parallel ? cout : 1, [&](int job) {
    const int oc_lo = parallel ? job : 0;
    const int oc_hi = parallel ? job + 1 : cout;
    std::vector<T> acc(wo);
    for (int oc = oc_lo; oc < oc_hi; ++oc) {
      T* o = out + static_cast<size_t>(oc) * plane_out;
      const T* wbase = weights + static_cast<size_t>(oc) * cin * k * k;
      for (int y = 0; y < ho; ++y) {
        std::fill(acc.begin(), acc.end(), bias[oc]);
        for (int ic = 0; ic < cin; ++ic) {
          const T* src = in + static_cast<size_t>(ic) * plane_in;
          const T* wk = wbase + static_cast<size_t>(ic) * k * k;
          if (k == 3 && stride == 1) {
            const T* r0 = src + static_cast<size_t>(y) * wp;
            detail::taps_3x3_row(r0, r0 + wp, r0 + 2 * wp, wk, wo, acc.data());
          } else {
            detail::taps_generic_row(src, wp, wk, k, stride, y, wo, acc.data());
          }
        }
        std::copy(acc.begin(), acc.end(), o + static_cast<size_t>(y) * wo);
      }
    }
  });
}

// grad_weights/grad_bias are accumulated (+=); grad_in is overwritten.
template <typename T>
void conv2d_backward(const T* in, int cin, int hp, int wp, const T* weights,
                     int cout, int k, int stride, const T* grad_out,
                     T* grad_weights, T* grad_bias, T* grad_in) {
  const int ho = (hp - k) / stride + 1;
  const int wo = (wp - k) / stride + 1;
  const size_t plane_in = static_cast<size_t>(hp) * wp;
  const size_t plane_out = static_cast<size_t>(ho) * wo;
  const bool big =
      static_cast<size_t>(cout) * cin * plane_out * k * k > (1u << 16);

  // d/dW and d/db: per output channel, lane-split plane reductions.
  parallel_for(big ? cout : 1, [&](int job) {
    const int oc_lo = big ? job : 0;
    const int oc_hi = big ? job + 1 : cout;
    for (int oc = oc_lo; oc < oc_hi; ++oc) {
      const T* go = grad_out + static_cast<size_t>(oc) * plane_out;
      grad_bias[oc] += static_cast<T>(detail::plane_sum_lanes(go, plane_out));
      for (int ic = 0; ic < cin; ++ic) {
        const T* src = in + static_cast<size_t>(ic) * plane_in;
        T* gw = grad_weights + (static_cast<size_t>(oc) * cin + ic) * k * k;
        if (k == 3 && stride == 1) {
          T nine[9];
          detail::nine_dots_3x3_s1(go, wo, ho, src, wp, nine);
          for (int j = 0; j < 9; ++j) gw[j] += nine[j];
        } else {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              gw[ky * k + kx] += detail::shifted_dot_lanes(go, wo, ho, src, wp,
                                                           stride, ky, kx);
            }
          }
        }
      }
    }
  });

  // d/d(input). For stride 1 this is the correlation of the zero-padded
  // gradient with the flipped kernel, which reuses the fast row kernels.
  // Strided convolutions keep the scatter form (they are a small share of
  // the work).
  if (stride == 1) {
    const int gp = k - 1;
    const int hg = ho + 2 * gp, wg = wo + 2 * gp;
    std::vector<T> gpad(static_cast<size_t>(cout) * hg * wg, T(0));
    parallel_for(big ? cout : 1, [&](int job) {
      const int oc_lo = big ? job : 0;
      const int oc_hi = big ? job + 1 : cout;
      for (int oc = oc_lo; oc < oc_hi; ++oc) {
        const T* go = grad_out + static_cast<size_t>(oc) * plane_out;
        T* dst = gpad.data() + static_cast<size_t>(oc) * hg * wg;
        for (int y = 0; y < ho; ++y) {
          std::copy(go + static_cast<size_t>(y) * wo,
                    go + static_cast<size_t>(y + 1) * wo,
                    dst + static_cast<size_t>(y + gp) * wg + gp);
        }
      }
    });
    // Flipped kernels, transposed to [ic][oc] so the inner loop streams them.
    std::vector<T> wflip(static_cast<size_t>(cin) * cout * k * k);
    for (int ic = 0; ic < cin; ++ic) {
      for (int oc = 0; oc < cout; ++oc) {
        const T* wk = weights + (static_cast<size_t>(oc) * cin + ic) * k * k;
        T* dst = wflip.data() + (static_cast<size_t>(ic) * cout + oc) * k * k;
        for (int i = 0; i < k * k; ++i) dst[i] = wk[k * k - 1 - i];
      }
    }
    parallel_for(big ? cin : 1, [&](int job) {
      const int ic_lo = big ? job : 0;
      const int ic_hi = big ? job + 1 : cin;
      std::vector<T> acc(wp);
      for (int ic = ic_lo; ic < ic_hi; ++ic) {
        T* gi = grad_in + static_cast<size_t>(ic) * plane_in;
        const T* wbase = wflip.data() + static_cast<size_t>(ic) * cout * k * k;
        for (int y = 0; y < hp; ++y) {
          std::fill(acc.begin(), acc.end(), T(0));
          for (int oc = 0; oc < cout; ++oc) {
            const T* wk = wbase + static_cast<size_t>(oc) * k * k;
            const T* src = gpad.data() + static_cast<size_t>(oc) * hg * wg;
            if (k == 3) {
              const T* r0 = src + static_cast<size_t>(y) * wg;
              detail::taps_3x3_row(r0, r0 + wg, r0 + 2 * wg, wk, wp,
                                   acc.data());
            } else {
              detail::taps_generic_row(src, wg, wk, k, 1, y, wp, acc.data());
            }
          }
          std::copy(acc.begin(), acc.end(), gi + static_cast<size_t>(y) * wp);
        }
      }
    });
  } else {
    parallel_for(big ? cin : 1, [&](int job) {
      const int ic_lo = big ? job : 0;
      const int ic_hi = big ? job + 1 : cin;
      for (int ic = ic_lo; ic < ic_hi; ++ic) {
        T* gi = grad_in + static_cast<size_t>(ic) * plane_in;
        for (size_t i = 0; i < plane_in; ++i) gi[i] = T(0);
        for (int oc = 0; oc < cout; ++oc) {
          const T* wk = weights + (static_cast<size_t>(oc) * cin + ic) * k * k;
          const T* go = grad_out + static_cast<size_t>(oc) * plane_out;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const T w = wk[ky * k + kx];
              for (int y = 0; y < ho; ++y) {
                T* row = gi + static_cast<size_t>(y * stride + ky) * wp + kx;
                const T* g = go + static_cast<size_t>(y) * wo;
                for (int x = 0; x < wo; ++x) {
                  row[static_cast<size_t>(x) * stride] += w * g[x];
                }
              }
            }
          }
        }
      }
    });
  }
}

// ---------------------------------------------------------------------------
// Per-channel normalization over spatial positions (current-pass statistics,
// learned scale and shift). Statistics are kept in double.

constexpr double kNormEps = 1e-5;

template <typename T>
void channel_norm_forward(const T* x, int c, size_t hw, const T* gamma,
                          const T* beta, T* y, double* mean, double* istd) {
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x + ch * hw;
    T* dst = y + ch * hw;
    const double mu = detail::plane_sum_lanes(src, hw) / static_cast<double>(hw);
    double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    size_t i = 0;
    for (; i + 8 <= hw; i += 8) {
      for (int l = 0; l < 8; ++l) {
        const double d = static_cast<double>(src[i + l]) - mu;
        lanes[l] += d * d;
      }
    }
    for (int l = 0; i < hw; ++i, ++l) {
      const double d = static_cast<double>(src[i]) - mu;
      lanes[l & 7] += d * d;
    }
    const double var = (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                        ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) /
                       static_cast<double>(hw);
    const double is = 1.0 / std::sqrt(var + kNormEps);
    mean[ch] = mu;
    istd[ch] = is;
    const T a = static_cast<T>(is * static_cast<double>(gamma[ch]));
    const T b = static_cast<T>(static_cast<double>(beta[ch]) -
                               mu * is * static_cast<double>(gamma[ch]));
    for (size_t j = 0; j < hw; ++j) dst[j] = a * src[j] + b;
  }
}

// grad_gamma/grad_beta accumulate (+=); grad_x is overwritten.
template <typename T>
void channel_norm_backward(const T* x, const double* mean, const double* istd,
                           const T* gamma, const T* grad_y, int c, size_t hw,
                           T* grad_x, T* grad_gamma, T* grad_beta) {
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x + ch * hw;
    const T* gy = grad_y + ch * hw;
    T* gx = grad_x + ch * hw;
    const double mu = mean[ch], is = istd[ch];
    double s1_lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    double s2_lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    size_t i = 0;
    for (; i + 8 <= hw; i += 8) {
      for (int l = 0; l < 8; ++l) {
        const double g = static_cast<double>(gy[i + l]);
        const double xhat = (static_cast<double>(src[i + l]) - mu) * is;
        s1_lanes[l] += g;
        s2_lanes[l] += g * xhat;
      }
    }
    for (int l = 0; i < hw; ++i, ++l) {
      const double g = static_cast<double>(gy[i]);
      const double xhat = (static_cast<double>(src[i]) - mu) * is;
      s1_lanes[l & 7] += g;
      s2_lanes[l & 7] += g * xhat;
    }
    const double sum_gy = ((s1_lanes[0] + s1_lanes[1]) + (s1_lanes[2] + s1_lanes[3])) +
                          ((s1_lanes[4] + s1_lanes[5]) + (s1_lanes[6] + s1_lanes[7]));
    const double sum_gy_xhat =
        ((s2_lanes[0] + s2_lanes[1]) + (s2_lanes[2] + s2_lanes[3])) +
        ((s2_lanes[4] + s2_lanes[5]) + (s2_lanes[6] + s2_lanes[7]));
    grad_gamma[ch] += static_cast<T>(sum_gy_xhat);
    grad_beta[ch] += static_cast<T>(sum_gy);
    const double n = static_cast<double>(hw);
    const double g_is = static_cast<double>(gamma[ch]) * is;
    // gx = g_is * (gy - mean(gy) - xhat * mean(gy * xhat)); expressed as an
    // affine map of (gy, x) so the hot loop stays in T.
    const double c1 = sum_gy / n;
    const double c2 = sum_gy_xhat / n;
    const T ka = static_cast<T>(g_is);
    const T kb = static_cast<T>(g_is * is * c2);
    const T kc = static_cast<T>(g_is * (-c1 + mu * is * c2));
    for (size_t j = 0; j < hw; ++j) {
      gx[j] = ka * gy[j] - kb * src[j] + kc;
    }
  }
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
void leaky_relu_forward(const T* x, size_t n, T slope, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(const T* x, const T* gy, size_t n, T slope, T* gx) {
  for (size_t i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? gy[i] : slope * gy[i];
}

// Clamped to the open interval (0,1): downstream contracts require strictly
// interior values even where the exact sigmoid would round to 0 or 1.
template <typename T>
void sigmoid_forward(const T* x, size_t n, T* y) {
  const T lo = std::nextafter(T(0), T(1));
  const T hi = std::nextafter(T(1), T(0));
  for (size_t i = 0; i < n; ++i) {
    T v = T(1) / (T(1) + std::exp(-x[i]));
    y[i] = v < lo ? lo : (v > hi ? hi : v);
  }
}

template <typename T>
void sigmoid_backward(const T* y, const T* gy, size_t n, T* gx) {
  for (size_t i = 0; i < n; ++i) gx[i] = gy[i] * y[i] * (T(1) - y[i]);
}

// ---------------------------------------------------------------------------
// 2x bilinear upsampling, half-pixel centers, edges clamped.
// Even output rows mix input rows (j-1, j) with weights (1/4, 3/4); odd rows
// mix (j, j+1) with (3/4, 1/4). Same pattern per axis.

namespace detail {

inline void up2_taps(int o, int n, int* i0, int* i1, double* w0, double* w1) {
  const int j = o / 2;
  if (o % 2 == 0) {
    *i0 = j - 1 < 0 ? 0 : j - 1;
    *i1 = j;
    *w0 = 0.25;
    *w1 = 0.75;
  } else {
    *i0 = j;
    *i1 = j + 1 > n - 1 ? n - 1 : j + 1;
    *w0 = 0.75;
    *w1 = 0.25;
  }
}

}  // namespace detail

template <typename T>
void upsample2x_forward(const T* in, int c, int h, int w, T* out) {
  const int ho = 2 * h, wo = 2 * w;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = in + static_cast<size_t>(ch) * h * w;
    T* dst = out + static_cast<size_t>(ch) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      int y0, y1;
      double wy0, wy1;
      detail::up2_taps(y, h, &y0, &y1, &wy0, &wy1);
      const T* r0 = src + static_cast<size_t>(y0) * w;
      const T* r1 = src + static_cast<size_t>(y1) * w;
      T* o = dst + static_cast<size_t>(y) * wo;
      for (int x = 0; x < wo; ++x) {
        int x0, x1;
        double wx0, wx1;
        detail::up2_taps(x, w, &x0, &x1, &wx0, &wx1);
        o[x] = static_cast<T>(wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) +
                              wy1 * (wx0 * r1[x0] + wx1 * r1[x1]));
      }
    }
  }
}

template <typename T>
void upsample2x_backward(const T* grad_out, int c, int h, int w, T* grad_in) {
  const int ho = 2 * h, wo = 2 * w;
  for (size_t i = 0; i < static_cast<size_t>(c) * h * w; ++i) grad_in[i] = T(0);
  for (int ch = 0; ch < c; ++ch) {
    const T* go = grad_out + static_cast<size_t>(ch) * ho * wo;
    T* gi = grad_in + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < ho; ++y) {
      int y0, y1;
      double wy0, wy1;
      detail::up2_taps(y, h, &y0, &y1, &wy0, &wy1);
      T* g0 = gi + static_cast<size_t>(y0) * w;
      T* g1 = gi + static_cast<size_t>(y1) * w;
      const T* o = go + static_cast<size_t>(y) * wo;
      for (int x = 0; x < wo; ++x) {
        int x0, x1;
        double wx0, wx1;
        detail::up2_taps(x, w, &x0, &x1, &wx0, &wx1);
        const double g = static_cast<double>(o[x]);
        g0[x0] += static_cast<T>(wy0 * wx0 * g);
        g0[x1] += static_cast<T>(wy0 * wx1 * g);
        g1[x0] += static_cast<T>(wy1 * wx0 * g);
        g1[x1] += static_cast<T>(wy1 * wx1 * g);
      }
    }
  }
}

}  // namespace dipfuse::ops
