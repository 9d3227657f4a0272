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

// Acoustic-unit language model baseline: MFCC frames are quantized to K
// discrete units with k-means, and an add-alpha smoothed n-gram model over
// unit sequences scores utterances by next-unit accuracy or perplexity.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ttsel/dsp.hpp"
#include "ttsel/scorer.hpp"

namespace ttsel {

struct Codebook {
  int k = 0;
  int dim = 0;
  std::vector<float> centroids;  // k x dim, row-major
  std::uint64_t seed = 0;
  std::vector<double> inertia_history;  // after each assignment step
  int iterations = 0;

  std::span<const float> centroid(int j) const {
    return {centroids.data() + static_cast<std::size_t>(j) * dim, static_cast<std::size_t>(dim)};
  }
  // dim x k copy used by the distance kernel.
  std::vector<float> transposed() const;
};

// k-means++ seeding, then Lloyd iterations until the assignment stops
// changing or max_iters is reached. A cluster that empties is re-seeded at
// the point farthest from its assigned centroid. frames is N x dim.
Codebook train_codebook(std::span<const float> frames, int dim, int k, std::uint64_t seed, int max_iters = 100);

struct UnitSequence {
  std::string utterance_id;
  std::vector<int> units;

  bool operator==(const UnitSequence&) const = default;
};

// Nearest centroid per frame, ties to the lowest index.
UnitSequence quantize(const FeatureMatrix& features, const Codebook& codebook, std::string utterance_id = {});

// Binary: "TTSC", u32 version, u32 K, u32 dim, u64 seed, K*dim f32.
void save_codebook(const Codebook& cb, const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

// TSV: id<TAB>space-separated units, one utterance per line.
std::string unit_sequences_to_tsv(const std::vector<UnitSequence>& seqs);
std::vector<UnitSequence> parse_unit_sequences(std::string_view tsv, std::string_view name = "<memory>");

// Add-alpha smoothed n-gram over units 0..K-1. Histories are the previous
// order-1 units, padded at the start of each sequence with a start symbol:
//   P(u | h) = (count(h, u) + alpha) / (count(h) + alpha * K)
class NgramLm {
 public:
  NgramLm(int order, int vocab, double alpha);

  int order() const { return order_; }
  int vocab() const { return vocab_; }
  double alpha() const { return alpha_; }
  int start_symbol() const { return vocab_; }

  // Adds one sequence's counts.
  void add_sequence(std::span<const int> units);

  // history holds exactly order-1 symbols in [0, K] (K = start symbol).
  double prob(std::span<const int> history, int unit) const;
  std::vector<double> distribution(std::span<const int> history) const;
  // argmax_u P(u | history); ties to the lowest unit.
  int predict(std::span<const int> history) const;

  // History preceding position t of a sequence (start-padded).
  std::vector<int> history_at(std::span<const int> units, std::size_t t) const;

  // Every context with at least one observation.
  std::vector<std::vector<int>> seen_contexts() const;
  std::uint64_t context_count(std::span<const int> history) const;
  std::uint64_t total_tokens() const { return tokens_; }

  std::string to_json() const;
  static NgramLm from_json(std::string_view text);

 private:
  struct Context {
    std::vector<std::uint32_t> next;
    std::uint64_t total = 0;
  };
  std::uint64_t key(std::span<const int> history) const;
  std::vector<int> unkey(std::uint64_t key) const;

  int order_;
  int vocab_;
  double alpha_;
  std::uint64_t tokens_ = 0;
  std::unordered_map<std::uint64_t, Context> contexts_;
};

NgramLm train_unit_lm(const std::vector<UnitSequence>& sequences, int vocab, int order = 3, double alpha = 0.5);

// exp(-(1/L) sum_t ln P(u_t | h_t)).
double ulm_perplexity(const NgramLm& lm, std::span<const int> units);
// Fraction of positions where the LM's argmax prediction equals the unit.
double ulm_accuracy(const NgramLm& lm, std::span<const int> units);

// Scores every sequence with method kUlmAcc or kUlmPpl.
ScoreFile score_unit_sequences(const NgramLm& lm, const std::vector<UnitSequence>& seqs, ScoreMethod metric);

}  // namespace ttsel
