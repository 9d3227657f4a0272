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
#include <json.hpp>

#include "ttsel/common.hpp"
#include "ttsel/corpus.hpp"

namespace ttsel {

std::string_view label_name(Label l) { return l == Label::kReal ? "real" : "synthetic"; }

Label parse_label(std::string_view s) {
  if (s == "real") return Label::kReal;
  if (s == "synthetic") return Label::kSynthetic;
  throw Error("invalid label \"" + std::string(s) + "\" (expected real|synthetic)");
}

void Manifest::add(UtteranceEntry entry) {
  if (entry.id.empty()) throw Error("manifest entry has an empty id");
  if (index_.contains(entry.id)) throw Error("duplicate utterance id \"" + entry.id + "\"");
  index_.emplace(entry.id, entries_.size());
  entries_.push_back(std::move(entry));
}

bool Manifest::contains(std::string_view id) const { return index_.contains(std::string(id)); }

std::optional<std::size_t> Manifest::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Manifest::count(Label l) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.label == l;
  return n;
}

Manifest Manifest::with_label(Label l) const {
  Manifest out(base_dir_);
  for (const auto& e : entries_) {
    if (e.label == l) out.add(e);
  }
  return out;
}

std::filesystem::path Manifest::resolve_audio(const UtteranceEntry& e) const {
  std::filesystem::path p(e.audio_path);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

Manifest parse_manifest(std::string_view jsonl, std::filesystem::path base_dir) {
  Manifest m(std::move(base_dir));
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    auto end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string line = trim(jsonl.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty()) {
      if (end == jsonl.size()) break;
      continue;
    }
    const std::string where = "manifest line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw Error(where + ": expected a JSON object");
    auto str_field = [&](const char* key, bool required) -> std::string {
      const auto it = j.find(key);
      if (it == j.end()) {
        if (required) throw Error(where + ": missing field \"" + key + "\"");
        return {};
      }
      if (!it->is_string()) throw Error(where + ": field \"" + key + "\" must be a string");
      return it->get<std::string>();
    };
    UtteranceEntry e;
    e.id = str_field("id", true);
    e.audio_path = str_field("audio", true);
    e.transcript = str_field("text", false);
    try {
      e.label = parse_label(str_field("label", true));
      m.add(std::move(e));
    } catch (const Error& err) {
      throw Error(where + ": " + err.what());
    }
    if (end == jsonl.size()) break;
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("manifest not found: " + path.string());
  return parse_manifest(read_text_file(path.string()), path.parent_path());
}

std::string manifest_to_jsonl(const Manifest& m) {
  std::string out;
  for (const auto& e : m) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["audio"] = e.audio_path;
    j["text"] = e.transcript;
    j["label"] = label_name(e.label);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  write_text_file(path.string(), manifest_to_jsonl(m));
}

}  // namespace ttsel
