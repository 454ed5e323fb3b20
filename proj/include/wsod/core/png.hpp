// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wsod/core/types.hpp"

// Minimal PNG reader/writer over zlib: 8-bit grayscale and RGB, non-interlaced.
// The writer emits filter type 0 scanlines with a fixed zlib level, so output
// bytes are a pure function of the pixel payload.

namespace wsod::core::png {

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::uint8_t* data, std::size_t len) {
  put_u32_be(out, static_cast<std::uint32_t>(len));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  if (len) out.insert(out.end(), data, data + len);
  const std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0L, out.data() + start, static_cast<uInt>(4 + len)));
  put_u32_be(out, crc);
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

inline std::vector<std::uint8_t> encode(int width, int height, int channels,
                                        const std::uint8_t* pixels) {
  const std::size_t row = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((row + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels + y * row, pixels + (y + 1) * row);
  }
  uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(bound);
  if (::compress2(z.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw_io("png: deflate failed");
  z.resize(bound);

  std::vector<std::uint8_t> out;
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), sig, sig + 8);
  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(width);
  ihdr[4] = static_cast<std::uint8_t>(height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(height);
  ihdr[8] = 8;                                             // bit depth
  ihdr[9] = static_cast<std::uint8_t>(channels == 1 ? 0 : 2);  // gray / rgb
  ihdr[10] = 0;
  ihdr[11] = 0;
  ihdr[12] = 0;
  append_chunk(out, "IHDR", ihdr, 13);
  append_chunk(out, "IDAT", z.data(), z.size());
  append_chunk(out, "IEND", nullptr, 0);
  return out;
}

struct Decoded {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

inline Decoded decode(const std::vector<std::uint8_t>& file, const std::string& name) {
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0)
    throw_io("png: bad signature in " + name);
  Decoded d;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool seen_ihdr = false;
  while (pos + 8 <= file.size()) {
    const std::uint32_t len = get_u32_be(file.data() + pos);
    if (pos + 12 + len > file.size()) throw_io("png: truncated chunk in " + name);
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const std::uint8_t* data = file.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw_io("png: bad IHDR in " + name);
      d.width = static_cast<int>(get_u32_be(data));
      d.height = static_cast<int>(get_u32_be(data + 4));
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
        throw_io("png: unsupported format (need 8-bit gray or rgb, non-interlaced): " + name);
      d.channels = color == 0 ? 1 : 3;
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || d.width <= 0 || d.height <= 0) throw_io("png: missing IHDR in " + name);

  const std::size_t row = static_cast<std::size_t>(d.width) * d.channels;
  std::vector<std::uint8_t> raw((row + 1) * d.height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (::uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw_io("png: inflate failed for " + name);

  d.pixels.resize(row * d.height);
  const int bpp = d.channels;
  for (int y = 0; y < d.height; ++y) {
    const std::uint8_t filter = raw[y * (row + 1)];
    const std::uint8_t* src = raw.data() + y * (row + 1) + 1;
    std::uint8_t* cur = d.pixels.data() + y * row;
    const std::uint8_t* up = y > 0 ? cur - row : nullptr;
    for (std::size_t x = 0; x < row; ++x) {
      const int a = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x >= static_cast<std::size_t>(bpp)) ? up[x - bpp] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: throw_io("png: unknown filter in " + name);
      }
      cur[x] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return d;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_io("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                   std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw_io("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw_io("short write to " + path);
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

inline void write_image(const std::string& path, const ImageRGB& img) {
  std::vector<std::uint8_t> px(img.pixels() * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        px[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] = detail::to_byte(img.at(c, y, x));
  detail::write_file(path, detail::encode(img.width, img.height, 3, px.data()));
}

/// Grayscale PNG with value v encoding v/255.
inline void write_map(const std::string& path, const ScoreMap& m) {
  std::vector<std::uint8_t> px(m.pixels());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = detail::to_byte(m.data[i]);
  detail::write_file(path, detail::encode(m.width, m.height, 1, px.data()));
}

/// Mask PNG: foreground 255, background 0.
inline void write_mask(const std::string& path, const BinaryMask& m) {
  std::vector<std::uint8_t> px(m.pixels());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = m.data[i] ? 255 : 0;
  detail::write_file(path, detail::encode(m.width, m.height, 1, px.data()));
}

inline ImageRGB read_image(const std::string& path) {
  auto d = detail::decode(detail::read_file(path), path);
  ImageRGB img(d.height, d.width);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const std::uint8_t v =
            d.channels == 3 ? d.pixels[(static_cast<std::size_t>(y) * d.width + x) * 3 + c]
                            : d.pixels[static_cast<std::size_t>(y) * d.width + x];
        img.at(c, y, x) = v / 255.0;
      }
  return img;
}

inline ScoreMap read_map(const std::string& path) {
  auto d = detail::decode(detail::read_file(path), path);
  ScoreMap m(d.height, d.width);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    // average channels when handed an RGB file
    if (d.channels == 3)
      m.data[i] = (d.pixels[3 * i] + d.pixels[3 * i + 1] + d.pixels[3 * i + 2]) / (3.0 * 255.0);
    else
      m.data[i] = d.pixels[i] / 255.0;
  }
  return m;
}

/// Reads a mask PNG; values above 127 become foreground.
inline BinaryMask read_mask(const std::string& path) {
  auto d = detail::decode(detail::read_file(path), path);
  BinaryMask m(d.height, d.width);
  for (std::size_t i = 0; i < m.pixels(); ++i) {
    const std::uint8_t v = d.channels == 3 ? d.pixels[3 * i] : d.pixels[i];
    m.data[i] = v > 127 ? 1 : 0;
  }
  return m;
}

}  // namespace wsod::core::png
