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

#include "ttsel/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "ttsel/common.hpp"

namespace ttsel {

std::string normalize_token(std::string_view raw) {
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  std::size_t b = 0, e = raw.size();
  while (b < e && punct(raw[b])) ++b;
  while (e > b && punct(raw[e - 1])) --e;
  std::string out(raw.substr(b, e - b));
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::set<std::string> tokenize(std::string_view transcript) {
  std::set<std::string> out;
  std::size_t i = 0;
  while (i < transcript.size()) {
    while (i < transcript.size() && std::isspace(static_cast<unsigned char>(transcript[i]))) ++i;
    std::size_t j = i;
    while (j < transcript.size() && !std::isspace(static_cast<unsigned char>(transcript[j]))) ++j;
    if (j > i) {
      auto tok = normalize_token(transcript.substr(i, j - i));
      if (!tok.empty()) out.insert(std::move(tok));
    }
    i = j;
  }
  return out;
}

Vocabulary vocabulary(const Manifest& m, std::string source) {
  Vocabulary v;
  v.source = std::move(source);
  for (const auto& e : m) {
    auto t = tokenize(e.transcript);
    v.tokens.insert(t.begin(), t.end());
  }
  return v;
}

UnseenWords unseen_words(const Vocabulary& train_vocab, const Manifest& eval, const Manifest& candidate_pool) {
  const auto ev = vocabulary(eval).tokens;
  const auto pv = vocabulary(candidate_pool).tokens;
  UnseenWords out;
  for (const auto& w : ev) {
    if (pv.count(w) && !train_vocab.contains(w)) out.words.push_back(w);
  }
  return out;
}

ContainingResult utterances_containing(const Manifest& pool, const std::vector<std::string>& words) {
  std::unordered_set<std::string> wanted;
  for (const auto& w : words) {
    auto n = normalize_token(w);
    if (!n.empty()) wanted.insert(std::move(n));
  }
  ContainingResult out;
  if (wanted.empty()) return out;
  for (const auto& e : pool) {
    const auto toks = tokenize(e.transcript);
    if (std::any_of(toks.begin(), toks.end(), [&](const std::string& t) { return wanted.count(t) > 0; })) {
      out.ids.push_back(e.id);
    }
  }
  return out;
}

SelectionReport selection_report(const ScoreFile& scores, const std::vector<SelectionRange>& ranges) {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      const auto& a = ranges[i];
      const auto& b = ranges[j];
      if (a.low < b.high && b.low < a.high) {
        throw Error("selection report: ranges " + std::to_string(i) + " [" + format_fixed(a.low) + ", " +
                    format_fixed(a.high) + ") and " + std::to_string(j) + " [" + format_fixed(b.low) + ", " +
                    format_fixed(b.high) + ") overlap");
      }
    }
  }
  SelectionReport r;
  r.n_scores = scores.size();
  r.histogram.assign(kHistogramBins, 0);
  for (const auto& rg : ranges) r.ranges.push_back(RangeStat{rg, 0, 0.0});
  if (scores.empty()) return r;

  double lo = 0.0, hi = 1.0;
  for (const auto& rec : scores.records) {
    lo = std::min(lo, rec.score);
    hi = std::max(hi, rec.score);
  }
  r.hist_low = lo;
  r.hist_high = hi;
  for (const auto& rec : scores.records) {
    for (auto& st : r.ranges) st.count += st.range.contains(rec.score);
    auto bin = static_cast<long>(std::floor((rec.score - lo) / (hi - lo) * kHistogramBins));
    bin = std::clamp(bin, 0L, static_cast<long>(kHistogramBins - 1));
    ++r.histogram[static_cast<std::size_t>(bin)];
  }
  for (auto& st : r.ranges) st.fraction = static_cast<double>(st.count) / static_cast<double>(r.n_scores);
  return r;
}

static nlohmann::ordered_json bound_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string report_to_json(const SelectionReport& r) {
  nlohmann::ordered_json j;
  j["n_scores"] = r.n_scores;
  auto& rs = j["ranges"] = nlohmann::ordered_json::array();
  for (const auto& st : r.ranges) {
    rs.push_back({{"low", bound_json(st.range.low)}, {"high", bound_json(st.range.high)}, {"count", st.count}, {"fraction", st.fraction}});
  }
  j["histogram"] = {{"low", r.hist_low}, {"high", r.hist_high}, {"bins", r.histogram}};
  return j.dump(1) + "\n";
}

std::string histogram_text(const SelectionReport& r, int width) {
  const std::size_t peak = r.histogram.empty() ? 0 : *std::max_element(r.histogram.begin(), r.histogram.end());
  const double step = (r.hist_high - r.hist_low) / static_cast<double>(r.histogram.size());
  std::string out;
  for (std::size_t b = 0; b < r.histogram.size(); ++b) {
    const double lo = r.hist_low + step * static_cast<double>(b);
    const auto n = r.histogram[b];
    const auto bar = peak ? static_cast<std::size_t>(std::lround(static_cast<double>(n) * width / static_cast<double>(peak))) : 0;
    out += format_fixed(lo, 3) + "-" + format_fixed(lo + step, 3) + " " + std::string(bar, '#');
    out += (bar ? " " : "") + std::to_string(n) + "\n";
  }
  return out;
}

SelectionResult replace_unseen_word_utterances(const SelectionResult& sel, const ScoreFile& scores,
                                               const SelectionRange& range, const Manifest& pool,
                                               const std::vector<std::string>& words, std::uint64_t seed) {
  const auto dirty_ids = utterances_containing(pool, words).ids;
  const std::unordered_set<std::string> dirty(dirty_ids.begin(), dirty_ids.end());
  const std::unordered_set<std::string> selected(sel.ids.begin(), sel.ids.end());

  std::vector<std::string> kept;
  for (const auto& id : sel.ids) {
    if (!dirty.count(id)) kept.push_back(id);
  }
  const std::size_t dropped = sel.ids.size() - kept.size();

  // Clean, unselected candidates from the same range, in score-file order.
  std::vector<std::string> candidates;
  for (const auto& rec : scores.records) {
    const auto& id = rec.utterance_id;
    if (range.contains(rec.score) && !selected.count(id) && !dirty.count(id) && pool.contains(id)) {
      candidates.push_back(id);
    }
  }
  Rng rng(derive_seed(seed, "unseen-replace"));
  const std::size_t take = std::min(dropped, candidates.size());
  for (std::size_t i = 0; i < take; ++i) std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
  std::unordered_set<std::string> final_ids(kept.begin(), kept.end());
  final_ids.insert(candidates.begin(), candidates.begin() + static_cast<long>(take));

  SelectionResult out;
  out.criterion = sel.criterion + "+unseen-filter";
  out.pool = sel.pool;
  out.pool_size = sel.pool_size;
  for (const auto& rec : scores.records) {
    if (final_ids.count(rec.utterance_id)) out.ids.push_back(rec.utterance_id);
  }
  return out;
}

std::vector<RangeUnseen> unseen_by_range(const ScoreFile& scores, const std::vector<SelectionRange>& ranges,
                                         const Manifest& pool, const UnseenWords& unseen) {
  const std::set<std::string> target(unseen.words.begin(), unseen.words.end());
  std::vector<RangeUnseen> out;
  for (const auto& rg : ranges) {
    RangeUnseen ru{rg, {}, 0};
    std::set<std::string> found;
    for (const auto& rec : scores.records) {
      if (!rg.contains(rec.score)) continue;
      const auto idx = pool.index_of(rec.utterance_id);
      if (!idx) continue;
      bool any = false;
      for (const auto& t : tokenize(pool[*idx].transcript)) {
        if (target.count(t)) {
          found.insert(t);
          any = true;
        }
      }
      ru.utterances += any;
    }
    ru.words.assign(found.begin(), found.end());
    out.push_back(std::move(ru));
  }
  return out;
}

}  // namespace ttsel
