// Copyright 2026 The dipfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal PNG container for the one pixel layout this project uses:
// 8-bit grayscale, no alpha, no interlace. zlib does the compression;
// everything else (chunk framing, filters) is handled here so that
// unsupported color types are rejected instead of silently converted.
#include <zlib.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "dipfuse/errors.hpp"
#include "dipfuse/image.hpp"

namespace dipfuse {

namespace {

const uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

uint32_t read_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void push_chunk(std::vector<uint8_t>& out, const char type[4],
                const std::vector<uint8_t>& payload) {
  push_u32(out, static_cast<uint32_t>(payload.size()));
  const size_t type_off = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  uint32_t crc = crc32(0, out.data() + type_off, static_cast<uInt>(4 + payload.size()));
  push_u32(out, crc);
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in, size_t expected) {
  std::vector<uint8_t> out(expected);
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit(&zs) != Z_OK) throw IoError("png: inflate init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    throw IoError("png: truncated or corrupt image data");
  }
  return out;
}

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace

Image png_decode(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
    throw IoError("png: bad signature");
  }
  size_t off = 8;
  bool have_header = false;
  uint32_t w = 0, h = 0;
  std::vector<uint8_t> idat;
  for (;;) {
    if (bytes.size() - off < 12) throw IoError("png: truncated chunk");
    const uint32_t len = read_u32(&bytes[off]);
    if (bytes.size() - off - 12 < len) throw IoError("png: truncated chunk");
    const uint8_t* type = &bytes[off + 4];
    const uint8_t* data = &bytes[off + 8];
    const uint32_t want_crc = read_u32(data + len);
    if (crc32(0, type, 4 + len) != want_crc) throw IoError("png: chunk crc mismatch");

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw IoError("png: bad IHDR");
      w = read_u32(data);
      h = read_u32(data + 4);
      const int bit_depth = data[8], color_type = data[9];
      const int compression = data[10], filter = data[11], interlace = data[12];
      if (color_type != 0 || bit_depth != 8) {
        throw IoError("png: only 8-bit grayscale is supported");
      }
      if (compression != 0 || filter != 0) throw IoError("png: bad IHDR");
      if (interlace != 0) throw IoError("png: interlacing not supported");
      if (w == 0 || h == 0 || static_cast<uint64_t>(w) * h > (1u << 30)) {
        throw IoError("png: bad dimensions");
      }
      have_header = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      if (!have_header) throw IoError("png: IDAT before IHDR");
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    off += 12 + len;
  }
  if (!have_header) throw IoError("png: missing IHDR");

  const size_t stride = static_cast<size_t>(w) + 1;  // filter byte + row
  std::vector<uint8_t> raw = zlib_inflate(idat, stride * h);

  // Undo per-row filters in place; bytes-per-pixel is 1.
  std::vector<uint8_t> prev(w, 0);
  Image img = make_image(static_cast<int>(w), static_cast<int>(h));
  std::vector<uint8_t> cur(w);
  for (uint32_t y = 0; y < h; ++y) {
    const uint8_t ftype = raw[y * stride];
    const uint8_t* row = &raw[y * stride + 1];
    for (uint32_t x = 0; x < w; ++x) {
      const int a = x > 0 ? cur[x - 1] : 0;
      const int b = prev[x];
      const int c = x > 0 ? prev[x - 1] : 0;
      int v = row[x];
      switch (ftype) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw IoError("png: unknown row filter");
      }
      cur[x] = static_cast<uint8_t>(v);
    }
    for (uint32_t x = 0; x < w; ++x) {
      img.pixels[static_cast<size_t>(y) * w + x] = cur[x] / 255.0;
    }
    prev = cur;
  }
  return img;
}

std::vector<uint8_t> png_encode(const Image& img) {
  const uint32_t w = static_cast<uint32_t>(img.width);
  const uint32_t h = static_cast<uint32_t>(img.height);

  std::vector<uint8_t> raw;
  raw.reserve((static_cast<size_t>(w) + 1) * h);
  for (uint32_t y = 0; y < h; ++y) {
    raw.push_back(0);  // filter type None
    for (uint32_t x = 0; x < w; ++x) {
      const double p = img.pixels[static_cast<size_t>(y) * w + x];
      double scaled = std::floor(p * 255.0 + 0.5);
      scaled = scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled);
      raw.push_back(static_cast<uint8_t>(scaled));
    }
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK) {
    throw IoError("png: compression failed");
  }
  comp.resize(comp_len);

  std::vector<uint8_t> ihdr;
  push_u32(ihdr, w);
  push_u32(ihdr, h);
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // color type: grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace

  std::vector<uint8_t> out(kSignature, kSignature + 8);
  push_chunk(out, "IHDR", ihdr);
  push_chunk(out, "IDAT", comp);
  push_chunk(out, "IEND", {});
  return out;
}

}  // namespace dipfuse
