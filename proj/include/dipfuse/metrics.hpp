// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// The four objective fusion scores for a (source A, source B, fused F)
// triple: Xydeas-Petrovic edge preservation, fusion mutual information,
// Piella's quality index, and Cvejic's quality index.
#pragma once

#include <span>
#include <string>

#include "dipfuse/image.hpp"

namespace dipfuse {

struct MetricReport {
  double pe = 0.0;  // edge preservation, [0,1]
  double mi = 0.0;  // bits
  double q = 0.0;   // Piella, [-1,1]
  double cv = 0.0;  // Cvejic, [-1,1]
  bool pe_degenerate = false;  // both sources flat; pe reported as 0
  std::string file_a, file_b, file_f;
};

/// Wang-Bovik universal quality index over one window pair:
///   Q0 = 4*cov*mu_x*mu_y / ((var_x+var_y)(mu_x^2+mu_y^2)), clamped to [-1,1].
/// Zero denominator: 1 for identical windows, else 0.
double uiqi_window(std::span<const double> x, std::span<const double> y);

/// Edge-information preservation. Sobel strength/orientation agreement
/// mapped through sigmoids, weighted by source edge strength. When both
/// sources are flat every weight vanishes; the result is defined as 0 and
/// *degenerate (when given) is set.
double petrovic_qabf(const Image& a, const Image& b, const Image& f,
                     bool* degenerate = nullptr);

/// I(A;F) + I(B;F) in bits, from 256-bin joint histograms of the 8-bit
/// quantized images.
double mutual_information_metric(const Image& a, const Image& b,
                                 const Image& f);

/// Mean over all 8x8 sliding windows of the saliency-weighted (local
/// variance) mix of Q0(a,f) and Q0(b,f).
double piella_q(const Image& a, const Image& b, const Image& f);

/// Mean over all 8x8 sliding windows of the covariance-ratio-weighted mix,
/// with the weight clamped to [0,1].
double cvejic_q(const Image& a, const Image& b, const Image& f);

MetricReport evaluate_all(const Image& a, const Image& b, const Image& f);

/// Keys "pe", "mi", "q", "cv", "files"; numbers with 10 significant digits.
std::string metric_report_json(const MetricReport& report);

}  // namespace dipfuse
