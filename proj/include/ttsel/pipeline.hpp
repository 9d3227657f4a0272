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

// End-to-end orchestration: configuration, stage execution, and
// content-hash caching of stage outputs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ttsel/common.hpp"
#include "ttsel/dsp.hpp"
#include "ttsel/net.hpp"
#include "ttsel/scorer.hpp"
#include "ttsel/select.hpp"

namespace ttsel {

struct UlmConfig {
  int k = 100;
  int order = 3;
  double alpha = 0.5;
  int max_iters = 100;
  ScoreMethod metric = ScoreMethod::kUlmAcc;
};

// Generated corpus used when no manifests are configured.
struct ToyConfig {
  int n_real = 200;
  int n_synthetic = 200;
  int n_pool = 200;
  int n_eval = 50;
  double min_duration_s = 2.0;
  double max_duration_s = 4.0;
  std::vector<std::string> eval_words = {"ZEPHYR", "QUARTZ", "NEBULA", "FJORD", "GLYPH"};
  double pool_eval_word_rate = 0.3;
  double eval_eval_word_rate = 0.6;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  DspConfig dsp;
  NetConfig net;
  TrainConfig train;  // lr applies to the BCE head
  ArcfaceConfig arcface;
  double arcface_lr = 1e-5;
  UlmConfig ulm;
  ToyConfig toy;
  // Selection criteria, in parse_criterion syntax.
  std::string select_cls = "range:0.2:0.5";
  std::string select_cos = "range:0.2:0.8";
  std::string select_ulm = "top:0.36";
  // Analysis score windows "lo:hi,lo:hi,..." ("inf" allowed as a bound).
  std::string analysis_ranges = "0:0.2,0.2:0.5,0.5:inf";
  // Manifests; all empty means "generate the toy corpus".
  std::string train_manifest, dev_manifest, pool_manifest, eval_manifest;
  std::string out_dir = "ttsel_out";
  std::string cache_dir;  // empty: <out_dir>/features

  // Throws ConfigError naming the offending key.
  void validate() const;
  // Canonical "key = value" text of every setting (threads excluded, since
  // outputs do not depend on it).
  std::string canonical() const;
  // Training settings for the configured head.
  TrainConfig train_for_head() const;
  std::filesystem::path cache_path() const;
  bool uses_toy_corpus() const { return train_manifest.empty(); }
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Flat "section.key = value" lines, '#' comments. Unknown and repeated keys
// are rejected. Keys absent from the text keep their defaults.
PipelineConfig parse_config_text(std::string_view text, std::string_view name = "<config>");
PipelineConfig parse_config(const std::filesystem::path& path);
// Applies one "key=value" override on top of an existing config.
void apply_config_override(PipelineConfig& cfg, std::string_view assignment);
std::vector<std::string> config_keys();

std::vector<SelectionRange> parse_ranges(std::string_view s);

// ---- stages ----

// Execution order of the full pipeline.
const std::vector<std::string>& all_stages();

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message)
      : Error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageOutcome {
  std::string stage;
  bool skipped = false;  // cached outputs were reused
  std::string key;
};

struct RunOptions {
  std::function<void(const std::string&)> log;
};

// Runs the named stages in pipeline order. A stage whose stamp matches the
// current configuration and whose outputs are intact is skipped. Missing
// upstream artifacts raise StageError naming both stages.
std::vector<StageOutcome> run_pipeline(const PipelineConfig& cfg, const std::vector<std::string>& stages,
                                       const RunOptions& opts = {});

// Artifact locations relative to out_dir.
namespace artifacts {
inline constexpr const char* kTrainManifest = "corpus/train.jsonl";
inline constexpr const char* kDevManifest = "corpus/dev.jsonl";
inline constexpr const char* kPoolManifest = "corpus/pool.jsonl";
inline constexpr const char* kEvalManifest = "corpus/eval.jsonl";
inline constexpr const char* kFeatureIndex = "features.tsv";
inline constexpr const char* kCheckpoint = "scorer/model.ckpt";
inline constexpr const char* kTrainLog = "scorer/train_log.tsv";
inline constexpr const char* kAverageEmbedding = "scorer/average_real.json";
inline constexpr const char* kScorerScores = "scores/scorer.tsv";
inline constexpr const char* kDevScores = "scores/dev.tsv";
inline constexpr const char* kCodebook = "ulm/codebook.bin";
inline constexpr const char* kTrainUnits = "ulm/train_units.tsv";
inline constexpr const char* kPoolUnits = "ulm/pool_units.tsv";
inline constexpr const char* kUnitLm = "ulm/lm.json";
inline constexpr const char* kUlmScores = "scores/ulm.tsv";
inline constexpr const char* kScorerSelection = "selection/scorer.txt";
inline constexpr const char* kUlmSelection = "selection/ulm.txt";
inline constexpr const char* kFusedSelection = "selection/fused.txt";
inline constexpr const char* kAugmentedManifest = "selection/augmented.jsonl";
inline constexpr const char* kReport = "analysis/report.json";
inline constexpr const char* kHistogram = "analysis/histogram.txt";
}  // namespace artifacts

}  // namespace ttsel
