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

// Lexicon analytics over transcripts: which evaluation words are missing
// from the training vocabulary but reachable through a synthetic pool, and
// how selected score ranges distribute.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ttsel/corpus.hpp"
#include "ttsel/scorer.hpp"
#include "ttsel/select.hpp"

namespace ttsel {

struct Vocabulary {
  std::set<std::string> tokens;
  std::string source;

  bool contains(const std::string& w) const { return tokens.count(w) > 0; }
  std::size_t size() const { return tokens.size(); }
};

// Uppercases and strips leading/trailing non-alphanumeric characters;
// internal apostrophes and hyphens survive. Empty result means "no token".
std::string normalize_token(std::string_view raw);
std::set<std::string> tokenize(std::string_view transcript);

Vocabulary vocabulary(const Manifest& m, std::string source = {});

struct UnseenWords {
  std::vector<std::string> words;  // sorted
  std::size_t count() const { return words.size(); }
};

// Words in eval transcripts and in candidate_pool transcripts but not in
// train_vocab.
UnseenWords unseen_words(const Vocabulary& train_vocab, const Manifest& eval, const Manifest& candidate_pool);

struct ContainingResult {
  std::vector<std::string> ids;  // pool order
  std::size_t count() const { return ids.size(); }
};
ContainingResult utterances_containing(const Manifest& pool, const std::vector<std::string>& words);

struct RangeStat {
  SelectionRange range;
  std::size_t count = 0;
  double fraction = 0.0;
};

struct SelectionReport {
  std::vector<RangeStat> ranges;
  std::size_t n_scores = 0;
  // 50 equal-width bins over [hist_low, hist_high]; the top edge is closed.
  double hist_low = 0.0;
  double hist_high = 1.0;
  std::vector<std::size_t> histogram;
};

constexpr int kHistogramBins = 50;

// Throws when two ranges overlap. The histogram spans [0, 1] unless scores
// fall outside it, in which case it spans [min, max].
SelectionReport selection_report(const ScoreFile& scores, const std::vector<SelectionRange>& ranges);

// Infinite range bounds are written as the strings "inf" / "-inf".
std::string report_to_json(const SelectionReport& r);
std::string histogram_text(const SelectionReport& r, int width = 50);

// Unseen-word filtering: drops selected utterances containing any of `words`
// and tops the selection back up with same-range utterances free of them,
// drawn uniformly with the given seed. The result may be smaller when the
// range runs out of clean candidates.
SelectionResult replace_unseen_word_utterances(const SelectionResult& sel, const ScoreFile& scores,
                                               const SelectionRange& range, const Manifest& pool,
                                               const std::vector<std::string>& words, std::uint64_t seed);

// Per-range unseen-word report: for each range, the words (of `unseen`) that
// occur in the pool utterances scored inside it, and how many utterances
// carry at least one. A word may appear under several ranges.
struct RangeUnseen {
  SelectionRange range;
  std::vector<std::string> words;
  std::size_t utterances = 0;
};
std::vector<RangeUnseen> unseen_by_range(const ScoreFile& scores, const std::vector<SelectionRange>& ranges,
                                         const Manifest& pool, const UnseenWords& unseen);

}  // namespace ttsel
