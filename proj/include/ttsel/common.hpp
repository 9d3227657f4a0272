// Copyright 2026 The ttsel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ttsel {

// All recoverable failures in the library are reported with this type. The
// message names the offending entity (file, line, id, field) so callers can
// surface it unchanged.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a computation hits a numerically degenerate point (zero-norm
// vector under normalization, non-finite loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Seeded generator with distribution helpers that do not depend on the
// standard library's implementation-defined distributions, so that fixtures
// are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

// Little-endian binary helpers. The host is assumed little-endian (checked at
// compile time in common.cpp).
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f32s(std::ostream& os, const float* data, std::size_t n);
std::uint32_t read_u32(std::istream& is, std::string_view what);
std::uint64_t read_u64(std::istream& is, std::string_view what);
float read_f32(std::istream& is, std::string_view what);
void read_f32s(std::istream& is, float* data, std::size_t n, std::string_view what);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// Formats with a fixed number of decimals ("%.6f"); used by every text
// artifact so output is byte-stable.
std::string format_fixed(double v, int decimals = 6);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace ttsel
