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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <set>

#include "test_support.hpp"
#include "ttsel/analysis.hpp"

using namespace ttsel;

namespace {

Manifest with_texts(const std::string& prefix, std::initializer_list<const char*> texts) {
  Manifest m;
  int i = 0;
  for (const char* t : texts) m.add({prefix + std::to_string(i++), "x.wav", t, Label::kReal});
  return m;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("tokenization") {
  CHECK(vocabulary(with_texts("a", {"the cat", "The CAT sat"})).tokens == std::set<std::string>{"THE", "CAT", "SAT"});
  CHECK(vocabulary(Manifest{}).tokens.empty());
  CHECK(tokenize("don't  stop") == std::set<std::string>{"DON'T", "STOP"});
  CHECK(tokenize("\"Hello,\" she said... (twice)!") == std::set<std::string>{"HELLO", "SHE", "SAID", "TWICE"});
  CHECK(tokenize("well-known -- ...") == std::set<std::string>{"WELL-KNOWN"});
  CHECK(tokenize("").empty());
  CHECK(normalize_token("'quoted'") == "QUOTED");
  CHECK(normalize_token("!!!").empty());
}

TEST_CASE("unseen words: example and set algebra") {
  Vocabulary train;
  train.tokens = {"THE", "CAT"};
  const auto u = unseen_words(train, with_texts("e", {"the dog"}), with_texts("p", {"a dog barks"}));
  CHECK(u.words == std::vector<std::string>{"DOG"});
  CHECK(u.count() == 1);
  CHECK(unseen_words(train, with_texts("e", {"The cat"}), with_texts("p", {"the cat dog"})).words.empty());

  const auto tr = with_texts("t", {"alpha beta", "gamma delta"});
  const auto ev = with_texts("e", {"alpha omega", "zeta, eta!", "theta gamma"});
  const auto pl = with_texts("p", {"omega theta", "eta iota", "beta"});
  // Eval tokens {ALPHA OMEGA ZETA ETA THETA GAMMA}, minus train, intersect pool.
  const auto got = unseen_words(vocabulary(tr), ev, pl);
  CHECK(got.words == std::vector<std::string>{"ETA", "OMEGA", "THETA"});
  for (const auto& w : got.words) CHECK(!vocabulary(tr).contains(w));
}

TEST_CASE("utterances containing words") {
  const auto pool = with_texts("p", {"red fish", "blue fish", "one fish", "two birds"});
  CHECK(utterances_containing(pool, {}).count() == 0);
  CHECK(utterances_containing(pool, {"fish", "birds"}).count() == 4);
  CHECK(utterances_containing(pool, {"blue"}).ids == std::vector<std::string>{"p1"});
  const auto small = utterances_containing(pool, {"red"}).ids;
  const auto big = utterances_containing(pool, {"red", "two"}).ids;
  for (const auto& id : small) CHECK(std::find(big.begin(), big.end(), id) != big.end());
  CHECK(big == std::vector<std::string>{"p0", "p3"});
}

TEST_CASE("containing matches a brute-force scan on a toy pool") {
  ttsel::test::TempDir dir;
  ToyCorpusSpec spec;
  spec.n_real = 0;
  spec.n_synthetic = 60;
  spec.require_both_classes = false;
  spec.min_duration_s = spec.max_duration_s = 1.0;
  spec.eval_only_words = {"ZEPHYR", "QUARTZ", "NEBULA"};
  spec.eval_word_rate = 0.4;
  const auto pool = synthesize_toy_corpus(spec, dir.path());
  const std::vector<std::string> words{"zephyr", "Nebula"};
  std::vector<std::string> want;
  for (const auto& e : pool) {
    bool hit = false;
    for (const auto& w : split(e.transcript, ' ')) hit |= (w == "ZEPHYR" || w == "NEBULA");
    if (hit) want.push_back(e.id);
  }
  CHECK(!want.empty());
  CHECK(utterances_containing(pool, words).ids == want);
}

TEST_CASE("selection report counts, fractions and histogram") {
  ScoreFile f;
  for (double s : {0.05, 0.2, 0.3, 0.5, 0.9, 1.0}) f.records.push_back({"u" + std::to_string(f.size()), s, ScoreMethod::kClsXent});
  const auto r = selection_report(f, {{-kInf, 0.2}, {0.2, 0.5}, {0.5, kInf}});
  REQUIRE(r.ranges.size() == 3);
  CHECK(r.ranges[0].count == 1);
  CHECK(r.ranges[1].count == 2);
  CHECK(r.ranges[2].count == 3);
  CHECK(r.ranges[1].fraction == doctest::Approx(2.0 / 6.0));
  std::size_t total = 0;
  for (auto c : r.histogram) total += c;
  CHECK(total == 6);
  CHECK(r.histogram.size() == 50);
  CHECK(r.histogram[49] == 1);  // 1.0 lands in the closed top bin
  CHECK(r.histogram[0] == 0);
  CHECK(r.histogram[2] == 1);  // 0.05

  const auto partial = selection_report(f, {{0.2, 0.5}});
  CHECK(partial.ranges[0].fraction < 1.0);

  const auto empty = selection_report(ScoreFile{}, {{0.0, 0.5}});
  CHECK(empty.ranges[0].count == 0);
  CHECK(empty.ranges[0].fraction == 0.0);
  for (auto c : empty.histogram) CHECK(c == 0);

  CHECK_THROWS_WITH_AS(selection_report(f, {{0.0, 0.5}, {0.4, 0.8}}), doctest::Contains("overlap"), Error);
  CHECK_NOTHROW(selection_report(f, {{0.0, 0.5}, {0.5, 0.8}}));
}

TEST_CASE("uniform scores split into thirds") {
  Rng rng(11);
  ScoreFile f;
  const std::size_t n = 30000;
  for (std::size_t i = 0; i < n; ++i) f.records.push_back({"u" + std::to_string(i), rng.uniform(), ScoreMethod::kExternal});
  const auto r = selection_report(f, {{0.0, 1.0 / 3.0}, {1.0 / 3.0, 2.0 / 3.0}, {2.0 / 3.0, 1.0}});
  const double sd = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / static_cast<double>(n));
  double sum = 0;
  for (const auto& st : r.ranges) {
    CHECK(std::abs(st.fraction - 1.0 / 3.0) <= 3 * sd);
    sum += st.fraction;
  }
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("report json and histogram text") {
  ScoreFile f;
  for (double s : {0.1, 0.4, 0.7}) f.records.push_back({"u" + std::to_string(f.size()), s, ScoreMethod::kClsXent});
  const auto r = selection_report(f, {{0.0, 0.5}, {0.5, kInf}});
  const auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["n_scores"] == 3);
  CHECK(j["ranges"][1]["high"] == "inf");
  CHECK(j["ranges"][0]["count"] == 2);
  CHECK(j["histogram"]["bins"].size() == 50);
  const auto text = histogram_text(r, 10);
  CHECK(std::count(text.begin(), text.end(), '\n') == 50);
  CHECK(text.find("##########") != std::string::npos);
}

TEST_CASE("unseen-word filtering swaps within the same range") {
  Manifest pool;
  ScoreFile f;
  const char* texts[] = {"ZEPHYR one", "two", "three", "four QUARTZ", "five", "six", "seven", "eight"};
  const double scores[] = {0.3, 0.3, 0.35, 0.4, 0.45, 0.9, 0.1, 0.25};
  for (int i = 0; i < 8; ++i) {
    const std::string id = "p" + std::to_string(i);
    pool.add({id, "x.wav", texts[i], Label::kSynthetic});
    f.records.push_back({id, scores[i], ScoreMethod::kClsXent});
  }
  const SelectionRange range(0.2, 0.5);
  const auto sel = select(f, RangeCriterion{range});
  // Restrict the starting selection so there is something to swap in.
  SelectionResult start = sel;
  start.ids = {"p0", "p1", "p3"};
  const auto out = replace_unseen_word_utterances(start, f, range, pool, {"zephyr", "quartz"}, 3);
  CHECK(out.ids.size() == 3);
  std::set<std::string> got(out.ids.begin(), out.ids.end());
  CHECK(got.count("p0") == 0);
  CHECK(got.count("p3") == 0);
  CHECK(got.count("p1") == 1);
  for (const auto& id : out.ids) {
    const auto s = f.records[*pool.index_of(id)].score;
    CHECK(range.contains(s));
  }
  CHECK(replace_unseen_word_utterances(start, f, range, pool, {"zephyr", "quartz"}, 3).ids == out.ids);
  // Not enough clean candidates: the result shrinks.
  SelectionResult all = sel;
  const auto shrunk = replace_unseen_word_utterances(all, f, range, pool, {"zephyr", "quartz"}, 3);
  CHECK(shrunk.ids.size() == sel.ids.size() - 2);
}

TEST_CASE("unseen words by range count each range independently") {
  Manifest pool;
  ScoreFile f;
  const char* texts[] = {"ZEPHYR", "ZEPHYR QUARTZ", "plain", "QUARTZ"};
  const double scores[] = {0.1, 0.3, 0.35, 0.8};
  for (int i = 0; i < 4; ++i) {
    pool.add({"p" + std::to_string(i), "x.wav", texts[i], Label::kSynthetic});
    f.records.push_back({"p" + std::to_string(i), scores[i], ScoreMethod::kClsXent});
  }
  UnseenWords u;
  u.words = {"QUARTZ", "ZEPHYR"};
  const auto r = unseen_by_range(f, {{0.0, 0.2}, {0.2, 0.5}, {0.5, kInf}}, pool, u);
  REQUIRE(r.size() == 3);
  CHECK(r[0].words == std::vector<std::string>{"ZEPHYR"});
  CHECK(r[1].words == std::vector<std::string>{"QUARTZ", "ZEPHYR"});
  CHECK(r[1].utterances == 1);
  CHECK(r[2].words == std::vector<std::string>{"QUARTZ"});
}

}  // TEST_SUITE
