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

#include <cmath>
#include <fstream>

#include "ttsel/common.hpp"
#include "ttsel/net.hpp"

namespace ttsel {

namespace {
constexpr char kMagic[4] = {'T', 'T', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const ScorerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model.net.input_dim));
  write_u32(out, static_cast<std::uint32_t>(model.net.hidden));
  write_u32(out, static_cast<std::uint32_t>(model.net.embed_dim));
  write_u32(out, static_cast<std::uint32_t>(model.net.head));
  write_u32(out, static_cast<std::uint32_t>(model.arcface.n_classes));
  write_f32(out, static_cast<float>(model.arcface.scale));
  write_f32(out, static_cast<float>(model.arcface.margin));
  write_u64(out, model.params.size());
  write_f32s(out, model.norm.mean.data(), model.norm.mean.size());
  write_f32s(out, model.norm.inv_std.data(), model.norm.inv_std.size());
  write_f32s(out, model.params.data(), model.params.size());
  if (!out) throw Error("write failed: " + path.string());
}

ScorerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  const std::string what = "checkpoint " + path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw Error(what + ": bad magic");
  }
  if (read_u32(in, what) != kVersion) throw Error(what + ": unsupported version");
  ScorerModel m;
  m.net.input_dim = static_cast<int>(read_u32(in, what));
  m.net.hidden = static_cast<int>(read_u32(in, what));
  m.net.embed_dim = static_cast<int>(read_u32(in, what));
  const auto head = read_u32(in, what);
  if (head > 1) throw Error(what + ": unknown head type");
  m.net.head = static_cast<HeadType>(head);
  m.arcface.n_classes = static_cast<int>(read_u32(in, what));
  // Stored as f32; the config values round-trip through float.
  m.arcface.scale = read_f32(in, what);
  m.arcface.margin = read_f32(in, what);
  m.layout = ParamLayout::make(m.net, m.arcface);
  const auto count = read_u64(in, what);
  if (count != m.layout.total) {
    throw Error(what + ": parameter count " + std::to_string(count) + " does not match config (" +
                std::to_string(m.layout.total) + ")");
  }
  m.norm = InputNorm::identity(m.net.input_dim);
  read_f32s(in, m.norm.mean.data(), m.norm.mean.size(), what);
  read_f32s(in, m.norm.inv_std.data(), m.norm.inv_std.size(), what);
  m.params.resize(count);
  read_f32s(in, m.params.data(), m.params.size(), what);
  for (float p : m.params) {
    if (!std::isfinite(p)) throw Error(what + ": non-finite parameter");
  }
  return m;
}

}  // namespace ttsel
