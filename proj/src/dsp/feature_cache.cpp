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

#include <fstream>

#include "ttsel/common.hpp"
#include "ttsel/dsp.hpp"

namespace ttsel {

namespace {
constexpr char kMagic[4] = {'T', 'T', 'S', 'F'};
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write feature file: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(f.kind));
  write_u32(out, static_cast<std::uint32_t>(f.frames));
  write_u32(out, static_cast<std::uint32_t>(f.dims));
  write_f32(out, static_cast<float>(f.frame_hop_ms));
  write_f32s(out, f.data.data(), f.data.size());
  if (!out) throw Error("write failed: " + path.string());
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw Error("not a feature file: " + path.string());
  }
  const std::string what = "feature file " + path.string();
  const auto kind = read_u32(in, what);
  if (kind > 1) throw Error(what + ": unknown feature kind " + std::to_string(kind));
  const auto t = read_u32(in, what);
  const auto d = read_u32(in, what);
  const auto hop = read_f32(in, what);
  FeatureMatrix f(t, d, static_cast<FeatureKind>(kind), hop);
  read_f32s(in, f.data.data(), f.data.size(), what);
  return f;
}

}  // namespace ttsel
