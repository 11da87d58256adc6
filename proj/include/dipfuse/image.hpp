// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dipfuse {

enum class ImageFormat { pgm, png };

/// 2D grayscale raster. Pixels are row-major, normalized to [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  double at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  double& at(int x, int y) {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  size_t size() const { return pixels.size(); }
};

/// 8-bit quantization of an Image (input to the histogram metrics).
struct QuantizedImage {
  static constexpr int levels = 256;
  int width = 0;
  int height = 0;
  std::vector<uint8_t> codes;
};

/// Original dimensions remembered by pad_reflect_to_multiple.
struct CropRecord {
  int width = 0;
  int height = 0;
};

Image make_image(int width, int height, double fill = 0.0);

/// Decodes a PGM (P5, maxval 255 or 65535) or an 8-bit grayscale PNG.
/// Pixel values are stored value / maxval. Throws IoError on malformed
/// headers, truncated data, or unsupported encodings.
Image load_image(const std::vector<uint8_t>& bytes, ImageFormat format);

/// Encodes with code = round-half-up(p * maxval). PNG supports bitdepth 8
/// only; PGM supports 8 and 16 (16-bit samples big-endian).
std::vector<uint8_t> save_image(const Image& img, ImageFormat format,
                                int bitdepth = 8);

/// File helpers. Loading sniffs the format from the magic bytes; saving
/// picks it from the extension (.pgm or .png).
Image load_image_file(const std::string& path);
void save_image_file(const Image& img, const std::string& path,
                     int bitdepth = 8);

/// code = round-half-up(p * 255), clamped to [0,255].
QuantizedImage quantize8(const Image& img);

/// Pads on the bottom/right with mirrored rows/columns (edge sample not
/// repeated) until both dimensions are multiples of `multiple`. Throws
/// std::invalid_argument when a dimension of extent 1 would need padding.
std::pair<Image, CropRecord> pad_reflect_to_multiple(const Image& img,
                                                     int multiple);

/// Top-left crop back to the recorded dimensions.
Image crop_to(const Image& img, const CropRecord& rec);

/// Bilinear resampling with half-pixel-center alignment.
Image resize_bilinear(const Image& img, int out_width, int out_height);

}  // namespace dipfuse
