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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ttsel/corpus.hpp"
#include "ttsel/dsp.hpp"
#include "ttsel/net.hpp"

namespace ttsel {

enum class ScoreMethod : int { kClsXent, kCosArcface, kUlmAcc, kUlmPpl, kConfidence, kExternal };

std::string_view method_name(ScoreMethod m);
ScoreMethod parse_method(std::string_view s);

struct ScoreRecord {
  std::string utterance_id;
  double score = 0.0;
  ScoreMethod method = ScoreMethod::kExternal;

  bool operator==(const ScoreRecord&) const = default;
};

struct ScoreFile {
  std::vector<ScoreRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const ScoreFile&) const = default;
};

// TSV with header "id\tscore\tmethod"; scores printed with 6 decimals.
std::string score_file_to_tsv(const ScoreFile& f);
ScoreFile parse_score_file(std::string_view tsv, std::string_view name = "<memory>");
ScoreFile load_score_file(const std::filesystem::path& path);
void save_score_file(const ScoreFile& f, const std::filesystem::path& path);

// softmax(z)_1 = 1 / (1 + exp(z0 - z1)), evaluated with the max logit
// subtracted.
double classification_score_from_logits(double z0, double z1);

// Score in [0, 1] from a BCE-head model; > 0.5 means "predicted real".
double classification_score(const ScorerModel& model, const FeatureMatrix& features);

struct AverageRealEmbedding {
  std::vector<double> vector;  // unit L2 norm
  std::size_t n_source = 0;
};

// Normalizes each row, averages, then normalizes the mean. Throws on an
// empty input or a zero-norm row/mean.
AverageRealEmbedding average_of_embeddings(std::span<const float> rows, std::size_t dim);

AverageRealEmbedding average_real_embedding(const ScorerModel& model, const Manifest& reals,
                                            const FeatureProvider& features, int threads = 1);

// Cosine between an embedding and the (unit) average real embedding, in [-1, 1].
double cosine_to_average(std::span<const float> embedding, const AverageRealEmbedding& avg);
double similarity_score(const ScorerModel& model, const FeatureMatrix& features,
                        const AverageRealEmbedding& avg);

void save_average_embedding(const AverageRealEmbedding& avg, const std::filesystem::path& path);
AverageRealEmbedding load_average_embedding(const std::filesystem::path& path);

struct ScoreFailure {
  std::string utterance_id;
  std::string message;
};

struct CorpusScores {
  ScoreFile scores;  // manifest order, failed utterances omitted
  std::vector<ScoreFailure> failures;
};

struct ScoreOptions {
  int threads = 1;
  // Utterances per forward pass. Results do not depend on it.
  int batch_size = 16;
};

// Scores every manifest entry with a BCE model (method kClsXent) or an
// Arcface model plus average real embedding (kCosArcface). Per-utterance
// failures are collected, not fatal.
CorpusScores score_corpus(const ScorerModel& model, const Manifest& manifest, ScoreMethod method,
                          const FeatureProvider& features, const AverageRealEmbedding* avg = nullptr,
                          const ScoreOptions& opts = {});
CorpusScores score_corpus(const ScorerModel& model, const Manifest& manifest, ScoreMethod method,
                          const DspConfig& dsp, const AverageRealEmbedding* avg = nullptr,
                          const ScoreOptions& opts = {});

struct UarReport {
  double recall_real = 0.0;
  double recall_synthetic = 0.0;
  double uar = 0.0;
  std::size_t n_real = 0;
  std::size_t n_synthetic = 0;
};

// Predicted real iff score > 0.5.
UarReport evaluate_uar(const ScoreFile& scores, const Manifest& truth);

}  // namespace ttsel
