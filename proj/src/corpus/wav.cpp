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

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ttsel/common.hpp"
#include "ttsel/corpus.hpp"

namespace ttsel {

namespace {

std::uint16_t le16(const char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

std::uint32_t le32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

void put16(std::string& s, std::uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }
void put32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioBuffer decode_wav(std::string_view bytes, std::string_view name) {
  const std::string where(name);
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw Error(where + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  int sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > bytes.size()) throw Error(where + ": truncated fmt chunk");
      std::uint16_t format = le16(bytes.data() + body);
      const std::uint16_t channels = le16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(le32(bytes.data() + body + 4));
      const std::uint16_t bits = le16(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 40 && body + 26 <= bytes.size()) {
        format = le16(bytes.data() + body + 24);  // sub-format GUID starts with the format tag
      }
      if (format != kFormatPcm) throw Error(where + ": unsupported WAV format (not linear PCM)");
      if (channels != 1) {
        throw Error(where + ": unsupported WAV format (" + std::to_string(channels) +
                    " channels, expected mono)");
      }
      if (bits != 16) {
        throw Error(where + ": unsupported WAV format (" + std::to_string(bits) +
                    "-bit, expected 16-bit)");
      }
      if (sample_rate <= 0) throw Error(where + ": invalid sample rate");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(where + ": data chunk before fmt chunk");
      if (body + size > bytes.size()) throw Error(where + ": truncated data chunk");
      if (size % 2 != 0) throw Error(where + ": truncated sample in data chunk");
      AudioBuffer out;
      out.sample_rate = sample_rate;
      out.samples.resize(size / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        out.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(where + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

AudioBuffer read_audio(const std::filesystem::path& path) {
  return decode_wav(read_text_file(path.string()), path.string());
}

std::string encode_wav(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) throw Error("encode_wav: sample_rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  put32(s, 36 + data_bytes);
  s += "WAVE";
  s += "fmt ";
  put32(s, 16);
  put16(s, kFormatPcm);
  put16(s, 1);
  put32(s, static_cast<std::uint32_t>(audio.sample_rate));
  put32(s, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put16(s, 2);
  put16(s, 16);
  s += "data";
  put32(s, data_bytes);
  for (float x : audio.samples) {
    const double scaled = std::clamp(static_cast<double>(x), -1.0, 1.0) * 32768.0;
    const auto q = static_cast<std::int16_t>(std::clamp(std::lround(scaled), -32768L, 32767L));
    put16(s, static_cast<std::uint16_t>(q));
  }
  return s;
}

void write_audio(const std::filesystem::path& path, const AudioBuffer& audio) {
  write_text_file(path.string(), encode_wav(audio));
}

}  // namespace ttsel
