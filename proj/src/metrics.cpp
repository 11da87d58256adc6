// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#include "dipfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dipfuse/reflect.hpp"

namespace dipfuse {

namespace {

// Xydeas-Petrovic sigmoid constants (strength, then orientation). The
// metric's defining publication states the model; these are the widely used
// parameter values.
constexpr double kGammaG = 0.9994, kKappaG = -15.0, kSigmaG = 0.5;
constexpr double kGammaA = 0.9879, kKappaA = -22.0, kSigmaA = 0.8;

constexpr int kWindow = 8;  // Piella/Cvejic sliding window side

struct PairStats {
  double mean_x = 0.0, mean_y = 0.0;
  double var_x = 0.0, var_y = 0.0;  // sample variance (n-1)
  double cov = 0.0;
};

PairStats pair_stats(std::span<const double> x, std::span<const double> y) {
  PairStats s;
  const size_t n = x.size();
  for (size_t i = 0; i < n; ++i) {
    s.mean_x += x[i];
    s.mean_y += y[i];
  }
  s.mean_x /= static_cast<double>(n);
  s.mean_y /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - s.mean_x;
    const double dy = y[i] - s.mean_y;
    s.var_x += dx * dx;
    s.var_y += dy * dy;
    s.cov += dx * dy;
  }
  const double denom = static_cast<double>(n - 1);
  s.var_x /= denom;
  s.var_y /= denom;
  s.cov /= denom;
  return s;
}

void check_triple(const Image& a, const Image& b, const Image& f, int min_dim) {
  if (a.width != b.width || a.height != b.height || a.width != f.width ||
      a.height != f.height) {
    throw std::invalid_argument("metrics: image dimensions differ");
  }
  if (a.width < min_dim || a.height < min_dim) {
    throw std::invalid_argument("metrics: images smaller than " +
                                std::to_string(min_dim) + "x" +
                                std::to_string(min_dim));
  }
}

struct GradientField {
  std::vector<double> strength;
  std::vector<double> orientation;  // (-pi/2, pi/2], from arctan(sy/sx)
};

GradientField sobel_field(const Image& img) {
  const int w = img.width, h = img.height;
  GradientField gf;
  gf.strength.resize(img.size());
  gf.orientation.resize(img.size());
  for (int y = 0; y < h; ++y) {
    const int ym = reflect_index(y - 1, h), yp = reflect_index(y + 1, h);
    for (int x = 0; x < w; ++x) {
      const int xm = reflect_index(x - 1, w), xp = reflect_index(x + 1, w);
      const double tl = img.at(xm, ym), tc = img.at(x, ym), tr = img.at(xp, ym);
      const double ml = img.at(xm, y), mr = img.at(xp, y);
      const double bl = img.at(xm, yp), bc = img.at(x, yp), br = img.at(xp, yp);
      const double sx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
      const double sy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
      const size_t i = static_cast<size_t>(y) * w + x;
      gf.strength[i] = std::sqrt(sx * sx + sy * sy);
      gf.orientation[i] =
          sx == 0.0 ? std::numbers::pi / 2.0 : std::atan(sy / sx);
    }
  }
  return gf;
}

// Per-pixel edge preservation of source S in F.
double preservation(double g_s, double alpha_s, double g_f, double alpha_f) {
  double rel_strength;
  if (g_s == 0.0 && g_f == 0.0) {
    rel_strength = 0.0;
  } else {
    rel_strength = std::min(g_s, g_f) / std::max(g_s, g_f);
  }
  const double rel_orient =
      1.0 - std::abs(alpha_s - alpha_f) / (std::numbers::pi / 2.0);
  const double qg = kGammaG / (1.0 + std::exp(kKappaG * (rel_strength - kSigmaG)));
  const double qa = kGammaA / (1.0 + std::exp(kKappaA * (rel_orient - kSigmaA)));
  return qg * qa;
}

double image_entropy_term(const std::vector<double>& joint, int bins) {
  // I(X;Y) from a normalized joint histogram, zero cells skipped.
  std::vector<double> px(bins, 0.0), py(bins, 0.0);
  for (int x = 0; x < bins; ++x) {
    for (int y = 0; y < bins; ++y) {
      px[x] += joint[static_cast<size_t>(x) * bins + y];
      py[y] += joint[static_cast<size_t>(x) * bins + y];
    }
  }
  double info = 0.0;
  for (int x = 0; x < bins; ++x) {
    for (int y = 0; y < bins; ++y) {
      const double pxy = joint[static_cast<size_t>(x) * bins + y];
      if (pxy > 0.0) info += pxy * std::log2(pxy / (px[x] * py[y]));
    }
  }
  return info;
}

double mutual_information_pair(const QuantizedImage& a, const QuantizedImage& f) {
  constexpr int bins = QuantizedImage::levels;
  std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
  const double inv_n = 1.0 / static_cast<double>(a.codes.size());
  for (size_t i = 0; i < a.codes.size(); ++i) {
    joint[static_cast<size_t>(a.codes[i]) * bins + f.codes[i]] += inv_n;
  }
  return image_entropy_term(joint, bins);
}

// Gathers one 8x8 window from each image into contiguous buffers.
struct WindowCursor {
  const Image *a = nullptr, *b = nullptr, *f = nullptr;
  double wa[kWindow * kWindow] = {}, wb[kWindow * kWindow] = {},
         wf[kWindow * kWindow] = {};

  void load(int x0, int y0) {
    int i = 0;
    for (int dy = 0; dy < kWindow; ++dy) {
      for (int dx = 0; dx < kWindow; ++dx, ++i) {
        wa[i] = a->at(x0 + dx, y0 + dy);
        wb[i] = b->at(x0 + dx, y0 + dy);
        wf[i] = f->at(x0 + dx, y0 + dy);
      }
    }
  }
};

}  // namespace

double uiqi_window(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("uiqi: windows must have equal length >= 2");
  }
  const PairStats s = pair_stats(x, y);
  const double denom =
      (s.var_x + s.var_y) * (s.mean_x * s.mean_x + s.mean_y * s.mean_y);
  if (denom == 0.0) {
    return std::equal(x.begin(), x.end(), y.begin()) ? 1.0 : 0.0;
  }
  const double q = 4.0 * s.cov * s.mean_x * s.mean_y / denom;
  return std::clamp(q, -1.0, 1.0);
}

double petrovic_qabf(const Image& a, const Image& b, const Image& f,
                     bool* degenerate) {
  check_triple(a, b, f, 3);
  if (degenerate != nullptr) *degenerate = false;
  const GradientField ga = sobel_field(a);
  const GradientField gb = sobel_field(b);
  const GradientField gs = sobel_field(f);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double wa = ga.strength[i];
    const double wb = gb.strength[i];
    num += preservation(wa, ga.orientation[i], gs.strength[i], gs.orientation[i]) * wa +
           preservation(wb, gb.orientation[i], gs.strength[i], gs.orientation[i]) * wb;
    den += wa + wb;
  }
  if (den == 0.0) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  return num / den;
}

double mutual_information_metric(const Image& a, const Image& b,
                                 const Image& f) {
  check_triple(a, b, f, 1);
  const QuantizedImage qf = quantize8(f);
  return mutual_information_pair(quantize8(a), qf) +
         mutual_information_pair(quantize8(b), qf);
}

double piella_q(const Image& a, const Image& b, const Image& f) {
  check_triple(a, b, f, kWindow);
  WindowCursor cur;
  cur.a = &a;
  cur.b = &b;
  cur.f = &f;
  double total = 0.0;
  size_t count = 0;
  for (int y0 = 0; y0 + kWindow <= a.height; ++y0) {
    for (int x0 = 0; x0 + kWindow <= a.width; ++x0) {
      cur.load(x0, y0);
      const PairStats sab = pair_stats(cur.wa, cur.wb);
      const double var_sum = sab.var_x + sab.var_y;
      // Both saliency weights come off the shared denominator so that
      // swapping the sources swaps the terms bit-exactly.
      const double la = var_sum == 0.0 ? 0.5 : sab.var_x / var_sum;
      const double lb = var_sum == 0.0 ? 0.5 : sab.var_y / var_sum;
      total += la * uiqi_window(cur.wa, cur.wf) +
               lb * uiqi_window(cur.wb, cur.wf);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double cvejic_q(const Image& a, const Image& b, const Image& f) {
  check_triple(a, b, f, kWindow);
  WindowCursor cur;
  cur.a = &a;
  cur.b = &b;
  cur.f = &f;
  double total = 0.0;
  size_t count = 0;
  for (int y0 = 0; y0 + kWindow <= a.height; ++y0) {
    for (int x0 = 0; x0 + kWindow <= a.width; ++x0) {
      cur.load(x0, y0);
      const PairStats saf = pair_stats(cur.wa, cur.wf);
      const PairStats sbf = pair_stats(cur.wb, cur.wf);
      const double denom = saf.cov + sbf.cov;
      // Same two-sided weighting as piella_q, for exact swap symmetry.
      const double ma =
          denom == 0.0 ? 0.5 : std::clamp(saf.cov / denom, 0.0, 1.0);
      const double mb =
          denom == 0.0 ? 0.5 : std::clamp(sbf.cov / denom, 0.0, 1.0);
      total += ma * uiqi_window(cur.wa, cur.wf) +
               mb * uiqi_window(cur.wb, cur.wf);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricReport evaluate_all(const Image& a, const Image& b, const Image& f) {
  MetricReport r;
  r.pe = petrovic_qabf(a, b, f, &r.pe_degenerate);
  r.mi = mutual_information_metric(a, b, f);
  r.q = piella_q(a, b, f);
  r.cv = cvejic_q(a, b, f);
  return r;
}

std::string metric_report_json(const MetricReport& report) {
  const auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  const auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::string json = "{\n";
  json += "  \"pe\": " + fmt(report.pe) + ",\n";
  json += "  \"mi\": " + fmt(report.mi) + ",\n";
  json += "  \"q\": " + fmt(report.q) + ",\n";
  json += "  \"cv\": " + fmt(report.cv) + ",\n";
  json += "  \"files\": {\"a\": " + quote(report.file_a) +
          ", \"b\": " + quote(report.file_b) +
          ", \"f\": " + quote(report.file_f) + "}\n";
  json += "}\n";
  return json;
}

}  // namespace dipfuse
