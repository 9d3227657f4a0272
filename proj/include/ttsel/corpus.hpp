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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ttsel {

// Real speech is class 1, synthetic speech class 0.
enum class Label : int { kSynthetic = 0, kReal = 1 };

std::string_view label_name(Label l);
Label parse_label(std::string_view s);

struct UtteranceEntry {
  std::string id;
  std::string audio_path;  // as written in the manifest; may be relative
  std::string transcript;
  Label label = Label::kReal;

  bool operator==(const UtteranceEntry&) const = default;
};

// Ordered catalog of utterances with unique ids. Relative audio paths are
// resolved against base_dir(), which is the directory the manifest was loaded
// from (it does not take part in equality).
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

  // Throws Error on a duplicate or empty id.
  void add(UtteranceEntry entry);

  const std::vector<UtteranceEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const UtteranceEntry& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool contains(std::string_view id) const;
  // Index of id, or nullopt.
  std::optional<std::size_t> index_of(std::string_view id) const;

  std::size_t count(Label l) const;
  Manifest with_label(Label l) const;

  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_base_dir(std::filesystem::path dir) { base_dir_ = std::move(dir); }
  std::filesystem::path resolve_audio(const UtteranceEntry& e) const;

  bool operator==(const Manifest& other) const { return entries_ == other.entries_; }

 private:
  std::filesystem::path base_dir_;
  std::vector<UtteranceEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSON-lines: {"id": str, "audio": str, "text": str, "label": "real"|"synthetic"}.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(std::string_view jsonl, std::filesystem::path base_dir = {});
std::string manifest_to_jsonl(const Manifest& m);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

struct AudioBuffer {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Mono 16-bit linear PCM WAV only. Samples are scaled by 1/32768.
AudioBuffer read_audio(const std::filesystem::path& path);
AudioBuffer decode_wav(std::string_view bytes, std::string_view name = "<memory>");
// Clips to [-1, 1] and rounds to the nearest 16-bit step.
std::string encode_wav(const AudioBuffer& audio);
void write_audio(const std::filesystem::path& path, const AudioBuffer& audio);

// Desk-scale stand-in for a real/TTS corpus pair. "Real" utterances are
// harmonic complexes with jittered pitch, syllabic amplitude modulation and a
// low noise floor; "synthetic" ones are band-limited pulse-train buzz with
// constant pitch and level.
struct ToyCorpusSpec {
  int n_real = 50;
  int n_synthetic = 50;
  double min_duration_s = 2.0;
  double max_duration_s = 4.0;
  std::uint64_t seed = 1;
  int sample_rate = 16000;
  std::string id_prefix = "utt";
  // Transcript vocabulary. Empty selects default_word_list() minus the
  // eval-only words.
  std::vector<std::string> words;
  // Words kept out of `words`; each transcript includes one of them with
  // probability eval_word_rate.
  std::vector<std::string> eval_only_words;
  double eval_word_rate = 0.0;
  int min_words = 3;
  int max_words = 8;
  // Off for single-class sets such as an all-synthetic pool.
  bool require_both_classes = true;
};

// Writes <out_dir>/audio/<id>.wav for every utterance and returns the
// manifest (audio paths relative to out_dir). Real entries come first.
Manifest synthesize_toy_corpus(const ToyCorpusSpec& spec, const std::filesystem::path& out_dir);

// Bundled list of ~200 common English words (uppercase).
const std::vector<std::string>& default_word_list();

}  // namespace ttsel
