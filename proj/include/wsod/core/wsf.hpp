// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wsod/core/types.hpp"

// WSF1: a tiny binary tensor container.
//   bytes 0..3   magic "WSF1"
//   u32 LE       rank
//   u32 LE each  dims
//   f32 LE       payload, row-major
// Little-endian hosts are assumed (asserted at compile time below).

namespace wsod::core {

static_assert(std::endian::native == std::endian::little, "WSF1 i/o assumes a little-endian host");

struct TensorFile {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline void write_wsf(const std::string& path, const TensorFile& t) {
  if (t.values.size() != t.count()) throw_contract("wsf: dims / payload mismatch");
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw_io("cannot write " + path);
  f.write("WSF1", 4);
  const std::uint32_t rank = static_cast<std::uint32_t>(t.dims.size());
  f.write(reinterpret_cast<const char*>(&rank), 4);
  f.write(reinterpret_cast<const char*>(t.dims.data()), 4 * static_cast<std::streamsize>(rank));
  f.write(reinterpret_cast<const char*>(t.values.data()),
          4 * static_cast<std::streamsize>(t.values.size()));
  if (!f) throw_io("short write to " + path);
}

inline TensorFile read_wsf(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_io("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "WSF1", 4) != 0) throw_io("wsf: bad magic in " + path);
  std::uint32_t rank = 0;
  f.read(reinterpret_cast<char*>(&rank), 4);
  if (!f || rank > 8) throw_io("wsf: bad rank in " + path);
  TensorFile t;
  t.dims.resize(rank);
  f.read(reinterpret_cast<char*>(t.dims.data()), 4 * static_cast<std::streamsize>(rank));
  if (!f) throw_io("wsf: truncated dims in " + path);
  const std::size_t n = t.count();
  if (n > (1u << 28)) throw_io("wsf: implausible element count in " + path);
  t.values.resize(n);
  f.read(reinterpret_cast<char*>(t.values.data()), 4 * static_cast<std::streamsize>(n));
  if (!f) throw_io("wsf: truncated payload in " + path);
  return t;
}

/// Convenience: store a ScoreMap as a rank-2 tensor file.
inline void write_wsf_map(const std::string& path, const ScoreMap& m) {
  TensorFile t;
  t.dims = {static_cast<std::uint32_t>(m.height), static_cast<std::uint32_t>(m.width)};
  t.values.assign(m.data.begin(), m.data.end());
  write_wsf(path, t);
}

inline ScoreMap read_wsf_map(const std::string& path) {
  TensorFile t = read_wsf(path);
  if (t.dims.size() != 2) throw_io("wsf: expected rank-2 map in " + path);
  ScoreMap m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
  for (std::size_t i = 0; i < t.values.size(); ++i) m.data[i] = t.values[i];
  return m;
}

}  // namespace wsod::core
