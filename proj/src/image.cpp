// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
#include "dipfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dipfuse/errors.hpp"
#include "dipfuse/reflect.hpp"

namespace dipfuse {

// Implemented in png_codec.cpp.
Image png_decode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> png_encode(const Image& img);

namespace {

constexpr size_t kMaxPixels = 1u << 30;

bool is_pgm_space(uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Reads the next ASCII integer token, skipping whitespace and '#' comments
// that run to end of line, per the netpbm header convention.
long pgm_token(const std::vector<uint8_t>& b, size_t& off) {
  for (;;) {
    while (off < b.size() && is_pgm_space(b[off])) ++off;
    if (off < b.size() && b[off] == '#') {
      while (off < b.size() && b[off] != '\n') ++off;
      continue;
    }
    break;
  }
  if (off >= b.size() || b[off] < '0' || b[off] > '9') {
    throw IoError("pgm: malformed header");
  }
  long v = 0;
  while (off < b.size() && b[off] >= '0' && b[off] <= '9') {
    v = v * 10 + (b[off] - '0');
    if (v > 1 << 30) throw IoError("pgm: header value out of range");
    ++off;
  }
  return v;
}

Image pgm_decode(const std::vector<uint8_t>& b) {
  if (b.size() < 2 || b[0] != 'P' || b[1] != '5') {
    throw IoError("pgm: missing P5 magic");
  }
  size_t off = 2;
  const long w = pgm_token(b, off);
  const long h = pgm_token(b, off);
  const long maxval = pgm_token(b, off);
  if (w < 1 || h < 1 || static_cast<size_t>(w) * h > kMaxPixels) {
    throw IoError("pgm: bad dimensions");
  }
  if (maxval != 255 && maxval != 65535) {
    throw IoError("pgm: unsupported maxval " + std::to_string(maxval));
  }
  // Exactly one whitespace byte separates the header from the samples.
  if (off >= b.size() || !is_pgm_space(b[off])) {
    throw IoError("pgm: malformed header");
  }
  ++off;

  const size_t n = static_cast<size_t>(w) * h;
  const int bytes_per = maxval > 255 ? 2 : 1;
  if (b.size() - off < n * bytes_per) throw IoError("pgm: truncated pixel data");

  Image img = make_image(static_cast<int>(w), static_cast<int>(h));
  const double inv = 1.0 / static_cast<double>(maxval);
  if (bytes_per == 1) {
    for (size_t i = 0; i < n; ++i) img.pixels[i] = b[off + i] * inv;
  } else {
    for (size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(b[off + 2 * i]) << 8) |
                         b[off + 2 * i + 1];  // big-endian per the standard
      img.pixels[i] = v * inv;
    }
  }
  return img;
}

// Round-half-up quantization shared by all encoders.
inline unsigned quantize_code(double p, unsigned maxval) {
  const double scaled = std::floor(p * maxval + 0.5);
  if (scaled < 0.0) return 0;
  if (scaled > maxval) return maxval;
  return static_cast<unsigned>(scaled);
}

std::vector<uint8_t> pgm_encode(const Image& img, int bitdepth) {
  const unsigned maxval = bitdepth == 16 ? 65535u : 255u;
  std::string header = "P5\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n" +
                       std::to_string(maxval) + "\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.size() * (bitdepth == 16 ? 2 : 1));
  for (double p : img.pixels) {
    const unsigned code = quantize_code(p, maxval);
    if (bitdepth == 16) out.push_back(static_cast<uint8_t>(code >> 8));
    out.push_back(static_cast<uint8_t>(code & 0xff));
  }
  return out;
}

void check_valid(const Image& img) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<size_t>(img.width) * img.height) {
    throw std::invalid_argument("image: inconsistent dimensions");
  }
}

}  // namespace

Image make_image(int width, int height, double fill) {
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.assign(static_cast<size_t>(width) * height, fill);
  return img;
}

Image load_image(const std::vector<uint8_t>& bytes, ImageFormat format) {
  return format == ImageFormat::pgm ? pgm_decode(bytes) : png_decode(bytes);
}

std::vector<uint8_t> save_image(const Image& img, ImageFormat format,
                                int bitdepth) {
  check_valid(img);
  if (bitdepth != 8 && bitdepth != 16) {
    throw std::invalid_argument("save_image: bitdepth must be 8 or 16");
  }
  if (format == ImageFormat::png) {
    if (bitdepth != 8) {
      throw std::invalid_argument("save_image: png supports bitdepth 8 only");
    }
    return png_encode(img);
  }
  return pgm_encode(img, bitdepth);
}

Image load_image_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return load_image(bytes, ImageFormat::pgm);
  }
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P') {
    return load_image(bytes, ImageFormat::png);
  }
  throw IoError(path + ": unrecognized image format");
}

void save_image_file(const Image& img, const std::string& path, int bitdepth) {
  const bool png = path.size() >= 4 &&
                   path.compare(path.size() - 4, 4, ".png") == 0;
  const auto bytes =
      save_image(img, png ? ImageFormat::png : ImageFormat::pgm, bitdepth);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path);
}

QuantizedImage quantize8(const Image& img) {
  check_valid(img);
  QuantizedImage q;
  q.width = img.width;
  q.height = img.height;
  q.codes.resize(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    q.codes[i] = static_cast<uint8_t>(quantize_code(img.pixels[i], 255));
  }
  return q;
}

std::pair<Image, CropRecord> pad_reflect_to_multiple(const Image& img,
                                                     int multiple) {
  check_valid(img);
  if (multiple < 1) throw std::invalid_argument("pad: multiple must be >= 1");
  const auto round_up = [multiple](int v) {
    return ((v + multiple - 1) / multiple) * multiple;
  };
  const int w2 = round_up(img.width);
  const int h2 = round_up(img.height);
  if ((w2 > img.width && img.width < 2) || (h2 > img.height && img.height < 2)) {
    throw std::invalid_argument("pad: cannot reflect a 1-pixel extent");
  }
  Image out = make_image(w2, h2);
  for (int y = 0; y < h2; ++y) {
    const int sy = reflect_index(y, img.height);
    for (int x = 0; x < w2; ++x) {
      out.at(x, y) = img.at(reflect_index(x, img.width), sy);
    }
  }
  return {std::move(out), CropRecord{img.width, img.height}};
}

Image crop_to(const Image& img, const CropRecord& rec) {
  check_valid(img);
  if (rec.width > img.width || rec.height > img.height || rec.width < 1 ||
      rec.height < 1) {
    throw std::invalid_argument("crop: record exceeds image");
  }
  Image out = make_image(rec.width, rec.height);
  for (int y = 0; y < rec.height; ++y) {
    for (int x = 0; x < rec.width; ++x) out.at(x, y) = img.at(x, y);
  }
  return out;
}

Image resize_bilinear(const Image& img, int out_width, int out_height) {
  check_valid(img);
  if (out_width < 1 || out_height < 1) {
    throw std::invalid_argument("resize: dimensions must be >= 1");
  }
  // Separable: rows, then columns. Half-pixel centers with edge clamping.
  const auto sample_axis = [](int out_n, int in_n, int o, int* i0, int* i1,
                              double* t) {
    const double src = (o + 0.5) * (static_cast<double>(in_n) / out_n) - 0.5;
    const double f = std::floor(src);
    *t = src - f;
    *i0 = std::clamp(static_cast<int>(f), 0, in_n - 1);
    *i1 = std::clamp(static_cast<int>(f) + 1, 0, in_n - 1);
  };

  Image rows = make_image(out_width, img.height);
  for (int x = 0; x < out_width; ++x) {
    int x0, x1;
    double t;
    sample_axis(out_width, img.width, x, &x0, &x1, &t);
    for (int y = 0; y < img.height; ++y) {
      rows.at(x, y) = (1.0 - t) * img.at(x0, y) + t * img.at(x1, y);
    }
  }
  Image out = make_image(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    int y0, y1;
    double t;
    sample_axis(out_height, img.height, y, &y0, &y1, &t);
    for (int x = 0; x < out_width; ++x) {
      out.at(x, y) = (1.0 - t) * rows.at(x, y0) + t * rows.at(x, y1);
    }
  }
  return out;
}

}  // namespace dipfuse
