// Copyright (c) 2026 wsod contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace wsod {

enum class ErrorKind {
  config,    // bad flags, invalid parameter values; CLI exit code 2
  shape,     // dimension mismatch between operands
  numeric,   // non-finite inputs or results
  capacity,  // input exceeds a configured size budget
  contract,  // API precondition violated
  training,  // divergence during optimization
  io,        // file read/write failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& m) { throw Error(ErrorKind::config, m); }
[[noreturn]] inline void throw_shape(const std::string& m) { throw Error(ErrorKind::shape, m); }
[[noreturn]] inline void throw_numeric(const std::string& m) { throw Error(ErrorKind::numeric, m); }
[[noreturn]] inline void throw_capacity(const std::string& m) { throw Error(ErrorKind::capacity, m); }
[[noreturn]] inline void throw_contract(const std::string& m) { throw Error(ErrorKind::contract, m); }
[[noreturn]] inline void throw_training(const std::string& m) { throw Error(ErrorKind::training, m); }
[[noreturn]] inline void throw_io(const std::string& m) { throw Error(ErrorKind::io, m); }

// Stateless 64-bit mixer (splitmix64 finalizer). Used to derive independent
// stream seeds from a (seed, index) pair so per-sample generation does not
// depend on how many samples precede it.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled value mappings. The engine's output sequence is
// fixed by the standard; the standard distributions are not, and frozen
// regression constants depend on the exact stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // uniform integer in [lo, hi], inclusive; modulo mapping
  int uniform_int(int lo, int hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % range);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace wsod
