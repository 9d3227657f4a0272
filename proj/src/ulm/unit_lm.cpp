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
#include <json.hpp>

#include "ttsel/common.hpp"
#include "ttsel/ulm.hpp"

namespace ttsel {

namespace {

// (K+1)^(order-1) must fit in 64 bits for the context key.
constexpr int kMaxOrder = 8;

}  // namespace

NgramLm::NgramLm(int order, int vocab, double alpha) : order_(order), vocab_(vocab), alpha_(alpha) {
  if (order < 1 || order > kMaxOrder) throw Error("unit LM: order must be in [1, 8], got " + std::to_string(order));
  if (vocab < 2 || vocab > 65535) throw Error("unit LM: vocabulary size must be in [2, 65535]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("unit LM: alpha must be a positive finite number");
}

std::uint64_t NgramLm::key(std::span<const int> history) const {
  if (history.size() != static_cast<std::size_t>(order_ - 1)) {
    throw Error("unit LM: history must hold " + std::to_string(order_ - 1) + " symbols");
  }
  std::uint64_t k = 0;
  for (int h : history) {
    if (h < 0 || h > vocab_) throw Error("unit LM: history symbol " + std::to_string(h) + " out of range");
    k = k * static_cast<std::uint64_t>(vocab_ + 1) + static_cast<std::uint64_t>(h);
  }
  return k;
}

std::vector<int> NgramLm::unkey(std::uint64_t k) const {
  std::vector<int> h(static_cast<std::size_t>(order_ - 1));
  for (auto it = h.rbegin(); it != h.rend(); ++it) {
    *it = static_cast<int>(k % static_cast<std::uint64_t>(vocab_ + 1));
    k /= static_cast<std::uint64_t>(vocab_ + 1);
  }
  return h;
}

std::vector<int> NgramLm::history_at(std::span<const int> units, std::size_t t) const {
  std::vector<int> h(static_cast<std::size_t>(order_ - 1));
  for (std::size_t j = 0; j < h.size(); ++j) {
    // h[j] is the unit at position t - (order-1) + j.
    const auto back = h.size() - j;
    h[j] = t >= back ? units[t - back] : vocab_;
  }
  return h;
}

void NgramLm::add_sequence(std::span<const int> units) {
  for (std::size_t t = 0; t < units.size(); ++t) {
    const int u = units[t];
    if (u < 0 || u >= vocab_) throw Error("unit LM: unit " + std::to_string(u) + " outside [0, K)");
    auto& ctx = contexts_[key(history_at(units, t))];
    if (ctx.next.empty()) ctx.next.assign(static_cast<std::size_t>(vocab_), 0);
    ++ctx.next[static_cast<std::size_t>(u)];
    ++ctx.total;
    ++tokens_;
  }
}

double NgramLm::prob(std::span<const int> history, int unit) const {
  if (unit < 0 || unit >= vocab_) throw Error("unit LM: unit " + std::to_string(unit) + " outside [0, K)");
  const auto it = contexts_.find(key(history));
  const double c_hu = it == contexts_.end() ? 0.0 : static_cast<double>(it->second.next[unit]);
  const double c_h = it == contexts_.end() ? 0.0 : static_cast<double>(it->second.total);
  return (c_hu + alpha_) / (c_h + alpha_ * vocab_);
}

std::vector<double> NgramLm::distribution(std::span<const int> history) const {
  std::vector<double> p(static_cast<std::size_t>(vocab_));
  for (int u = 0; u < vocab_; ++u) p[u] = prob(history, u);
  return p;
}

int NgramLm::predict(std::span<const int> history) const {
  // P is monotone in count(h, u), so the first maximal count wins.
  const auto it = contexts_.find(key(history));
  if (it == contexts_.end()) return 0;
  const auto& next = it->second.next;
  return static_cast<int>(std::max_element(next.begin(), next.end()) - next.begin());
}

std::vector<std::vector<int>> NgramLm::seen_contexts() const {
  std::vector<std::uint64_t> keys;
  keys.reserve(contexts_.size());
  for (const auto& kv : contexts_) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  std::vector<std::vector<int>> out;
  out.reserve(keys.size());
  for (auto k : keys) out.push_back(unkey(k));
  return out;
}

std::uint64_t NgramLm::context_count(std::span<const int> history) const {
  const auto it = contexts_.find(key(history));
  return it == contexts_.end() ? 0 : it->second.total;
}

std::string NgramLm::to_json() const {
  nlohmann::ordered_json j;
  j["order"] = order_;
  j["vocab"] = vocab_;
  j["alpha"] = alpha_;
  auto& ctxs = j["contexts"] = nlohmann::ordered_json::array();
  std::vector<std::uint64_t> keys;
  for (const auto& kv : contexts_) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  for (auto k : keys) {
    const auto& c = contexts_.at(k);
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    for (int u = 0; u < vocab_; ++u) {
      if (c.next[u]) counts.push_back({u, c.next[u]});
    }
    ctxs.push_back({{"history", unkey(k)}, {"counts", counts}});
  }
  return j.dump() + "\n";
}

NgramLm NgramLm::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NgramLm lm(j.at("order").get<int>(), j.at("vocab").get<int>(), j.at("alpha").get<double>());
    for (const auto& c : j.at("contexts")) {
      const auto h = c.at("history").get<std::vector<int>>();
      auto& ctx = lm.contexts_[lm.key(h)];
      ctx.next.assign(static_cast<std::size_t>(lm.vocab_), 0);
      for (const auto& uc : c.at("counts")) {
        const int u = uc.at(0).get<int>();
        const auto n = uc.at(1).get<std::uint32_t>();
        if (u < 0 || u >= lm.vocab_) throw Error("unit LM file: unit out of range");
        ctx.next[u] += n;
        ctx.total += n;
        lm.tokens_ += n;
      }
    }
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid unit LM file: ") + e.what());
  }
}

NgramLm train_unit_lm(const std::vector<UnitSequence>& sequences, int vocab, int order, double alpha) {
  std::size_t total = 0;
  for (const auto& s : sequences) total += s.units.size();
  if (total == 0) throw Error("unit LM: empty training corpus");
  if (total < static_cast<std::size_t>(order)) {
    throw Error("unit LM: corpus has " + std::to_string(total) + " units, fewer than the order " +
                std::to_string(order));
  }
  NgramLm lm(order, vocab, alpha);
  for (const auto& s : sequences) lm.add_sequence(s.units);
  return lm;
}

double ulm_perplexity(const NgramLm& lm, std::span<const int> units) {
  if (units.empty()) throw Error("perplexity of an empty unit sequence");
  double log_sum = 0.0;
  for (std::size_t t = 0; t < units.size(); ++t) log_sum += std::log(lm.prob(lm.history_at(units, t), units[t]));
  return std::exp(-log_sum / static_cast<double>(units.size()));
}

double ulm_accuracy(const NgramLm& lm, std::span<const int> units) {
  if (units.empty()) throw Error("accuracy of an empty unit sequence");
  std::size_t hit = 0;
  for (std::size_t t = 0; t < units.size(); ++t) hit += lm.predict(lm.history_at(units, t)) == units[t];
  return static_cast<double>(hit) / static_cast<double>(units.size());
}

ScoreFile score_unit_sequences(const NgramLm& lm, const std::vector<UnitSequence>& seqs, ScoreMethod metric) {
  if (metric != ScoreMethod::kUlmAcc && metric != ScoreMethod::kUlmPpl) {
    throw Error("unit LM scoring supports ulm_acc and ulm_ppl only");
  }
  ScoreFile f;
  f.records.reserve(seqs.size());
  for (const auto& s : seqs) {
    const double v = metric == ScoreMethod::kUlmAcc ? ulm_accuracy(lm, s.units) : ulm_perplexity(lm, s.units);
    f.records.push_back(ScoreRecord{s.utterance_id, v, metric});
  }
  return f;
}

}  // namespace ttsel
