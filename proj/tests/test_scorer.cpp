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

#include <cmath>

#include "test_support.hpp"
#include "ttsel/scorer.hpp"

using namespace ttsel;
using ttsel::test::TempDir;

namespace {

Manifest small_corpus(const std::filesystem::path& dir, int per_class, std::uint64_t seed = 5) {
  ToyCorpusSpec spec;
  spec.n_real = per_class;
  spec.n_synthetic = per_class;
  spec.min_duration_s = 1.0;
  spec.max_duration_s = 1.5;
  spec.seed = seed;
  return synthesize_toy_corpus(spec, dir);
}

}  // namespace

TEST_SUITE("scorer") {

TEST_CASE("score file TSV format and round trip") {
  ScoreFile f;
  f.records = {{"a", 0.1234567, ScoreMethod::kClsXent}, {"b", -0.5, ScoreMethod::kCosArcface}, {"c", 12.0, ScoreMethod::kUlmPpl}};
  const auto tsv = score_file_to_tsv(f);
  CHECK(tsv == "id\tscore\tmethod\na\t0.123457\tcls_xent\nb\t-0.500000\tcos_arcface\nc\t12.000000\tulm_ppl\n");
  const auto back = parse_score_file(tsv);
  REQUIRE(back.size() == 3);
  CHECK(back.records[0].score == 0.123457);
  CHECK(back.records[2].method == ScoreMethod::kUlmPpl);
  CHECK(score_file_to_tsv(back) == tsv);
  CHECK(parse_score_file("id\tscore\tmethod\n").empty());
  CHECK(parse_score_file("id\tscore\tmethod\nx\t0.5\tconfidence\n").records[0].method == ScoreMethod::kConfidence);

  CHECK_THROWS_WITH_AS(parse_score_file("a\t0.1\tcls_xent\n"), doctest::Contains("header"), Error);
  CHECK_THROWS_WITH_AS(parse_score_file("id\tscore\tmethod\na\tzero\tcls_xent\n"), doctest::Contains(":2"), Error);
  CHECK_THROWS_AS(parse_score_file("id\tscore\tmethod\na\t0.1\tbogus\n"), Error);
  CHECK_THROWS_AS(parse_score_file("id\tscore\tmethod\na\t0.1\n"), Error);
}

TEST_CASE("classification score from logits") {
  CHECK(classification_score_from_logits(0.3, 0.3) == 0.5);
  CHECK(classification_score_from_logits(0.0, 1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(classification_score_from_logits(0.0, 1.0) == doctest::Approx(0.7311).epsilon(1e-4));
  const double low = classification_score_from_logits(40.0, 0.0);
  CHECK(std::isfinite(low));
  CHECK(low >= 0.0);
  CHECK(low < 1e-15);
  const double hi = classification_score_from_logits(-1000.0, 1000.0);
  CHECK(hi == 1.0);
  CHECK(classification_score_from_logits(1000.0, -1000.0) == 0.0);
  double prev = -1.0;
  for (double d = -10.0; d <= 10.0; d += 0.5) {
    const double s = classification_score_from_logits(0.0, d);
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("average of embeddings") {
  const float one[] = {3.0f, 4.0f};
  auto a = average_of_embeddings(one, 2);
  CHECK(a.vector[0] == doctest::Approx(0.6));
  CHECK(a.vector[1] == doctest::Approx(0.8));
  CHECK(a.n_source == 1);
  const float two[] = {3.0f, 4.0f, 6.0f, 8.0f};
  auto b = average_of_embeddings(two, 2);
  CHECK(b.vector[0] == doctest::Approx(0.6));
  CHECK(b.n_source == 2);
  const float axes[] = {1.0f, 0.0f, 0.0f, 5.0f};
  auto c = average_of_embeddings(axes, 2);
  CHECK(c.vector[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(c.vector[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
  const float anti[] = {1.0f, 0.0f, -1.0f, 0.0f};
  CHECK_THROWS_AS(average_of_embeddings(anti, 2), NumericalError);
  CHECK_THROWS_AS(average_of_embeddings(std::span<const float>(), 2), Error);
}

TEST_CASE("cosine to the average embedding") {
  AverageRealEmbedding avg{{0.6, 0.8}, 1};
  const float par[] = {3.0f, 4.0f};
  const float orth[] = {-8.0f, 6.0f};
  const float anti[] = {-0.3f, -0.4f};
  CHECK(cosine_to_average(par, avg) == doctest::Approx(1.0));
  CHECK(std::abs(cosine_to_average(orth, avg)) < 1e-9);
  CHECK(cosine_to_average(anti, avg) == doctest::Approx(-1.0));
  Rng rng(3);
  std::vector<double> v(6);
  for (auto& x : v) x = rng.normal();
  double n = 0;
  for (double x : v) n += x * x;
  for (auto& x : v) x /= std::sqrt(n);
  AverageRealEmbedding r{v, 1};
  std::vector<float> e(6);
  for (auto& x : e) x = static_cast<float>(rng.normal());
  double dot = 0, en = 0;
  for (int i = 0; i < 6; ++i) {
    dot += e[i] * v[i];
    en += static_cast<double>(e[i]) * e[i];
  }
  CHECK(cosine_to_average(e, r) == doctest::Approx(dot / std::sqrt(en)).epsilon(1e-9));
  std::vector<float> e2(e);
  for (auto& x : e2) x *= 3.0f;
  CHECK(cosine_to_average(e2, r) == doctest::Approx(cosine_to_average(e, r)).epsilon(1e-6));
  const float zero[] = {0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(cosine_to_average(zero, r), NumericalError);
}

TEST_CASE("average embedding file round trip") {
  TempDir dir;
  AverageRealEmbedding avg{{0.6, 0.8}, 7};
  save_average_embedding(avg, dir / "avg.json");
  const auto back = load_average_embedding(dir / "avg.json");
  CHECK(back.vector == avg.vector);
  CHECK(back.n_source == 7);
}

TEST_CASE("uar") {
  Manifest truth;
  ScoreFile s;
  for (int i = 0; i < 6; ++i) {
    truth.add({"r" + std::to_string(i), "x", "", Label::kReal});
    truth.add({"s" + std::to_string(i), "x", "", Label::kSynthetic});
  }
  for (int i = 0; i < 6; ++i) {
    s.records.push_back({"r" + std::to_string(i), 0.9, ScoreMethod::kClsXent});
    // Exactly 0.5 is not "real".
    s.records.push_back({"s" + std::to_string(i), i == 0 ? 0.7 : 0.5, ScoreMethod::kClsXent});
  }
  auto r = evaluate_uar(s, truth);
  CHECK(r.recall_real == 1.0);
  CHECK(r.recall_synthetic == doctest::Approx(5.0 / 6.0));
  CHECK(r.uar == doctest::Approx((1.0 + 5.0 / 6.0) / 2.0));
  CHECK(r.n_real == 6);
  CHECK(r.n_synthetic == 6);
  for (auto& rec : s.records) rec.score = 0.9;
  CHECK(evaluate_uar(s, truth).uar == 0.5);
  for (auto& rec : s.records) rec.score = rec.utterance_id[0] == 'r' ? 0.6 : 0.4;
  CHECK(evaluate_uar(s, truth).uar == 1.0);
  s.records.push_back({"ghost", 0.9, ScoreMethod::kClsXent});
  CHECK_THROWS_WITH_AS(evaluate_uar(s, truth), doctest::Contains("ghost"), Error);
}

TEST_CASE("uar of the reported recalls") {
  // 100% real recall and 83% synthetic recall average to 91.5%.
  Manifest truth;
  ScoreFile s;
  for (int i = 0; i < 100; ++i) {
    truth.add({"r" + std::to_string(i), "x", "", Label::kReal});
    truth.add({"s" + std::to_string(i), "x", "", Label::kSynthetic});
    s.records.push_back({"r" + std::to_string(i), 0.99, ScoreMethod::kClsXent});
    s.records.push_back({"s" + std::to_string(i), i < 83 ? 0.01 : 0.99, ScoreMethod::kClsXent});
  }
  CHECK(evaluate_uar(s, truth).uar == doctest::Approx(0.915));
}

TEST_CASE("corpus scoring is order- and thread-independent") {
  TempDir dir;
  const auto m = small_corpus(dir.path(), 50);
  const auto model = init_model(NetConfig{80, 32, 16, HeadType::kBce}, ArcfaceConfig{}, 2);
  const DspConfig dsp;
  ScoreOptions one{1, 16}, many{8, 5};
  const auto a = score_corpus(model, m, ScoreMethod::kClsXent, dsp, nullptr, one);
  const auto b = score_corpus(model, m, ScoreMethod::kClsXent, dsp, nullptr, many);
  REQUIRE(a.scores.size() == 100);
  CHECK(a.failures.empty());
  CHECK(score_file_to_tsv(a.scores) == score_file_to_tsv(b.scores));
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(a.scores.records[i].utterance_id == m[i].id);
    CHECK(a.scores.records[i].score >= 0.0);
    CHECK(a.scores.records[i].score <= 1.0);
  }
  // Single-utterance scoring agrees with the batched path.
  const auto f = log_mel(read_audio(m.resolve_audio(m[3])), dsp);
  CHECK(classification_score(model, f) == a.scores.records[3].score);
  CHECK(score_corpus(model, Manifest{}, ScoreMethod::kClsXent, dsp).scores.empty());
}

TEST_CASE("arcface corpus scoring") {
  TempDir dir;
  const auto m = small_corpus(dir.path(), 6);
  const auto model = init_model(NetConfig{80, 16, 8, HeadType::kArcface}, ArcfaceConfig{}, 3);
  const auto provider = log_mel_provider(DspConfig{});
  const auto avg = average_real_embedding(model, m.with_label(Label::kReal), provider, 2);
  double n = 0;
  for (double v : avg.vector) n += v * v;
  CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(avg.n_source == 6);
  const auto s1 = score_corpus(model, m, ScoreMethod::kCosArcface, provider, &avg, {1, 4});
  const auto s4 = score_corpus(model, m, ScoreMethod::kCosArcface, provider, &avg, {4, 3});
  CHECK(score_file_to_tsv(s1.scores) == score_file_to_tsv(s4.scores));
  for (const auto& r : s1.scores.records) {
    CHECK(r.score >= -1.0);
    CHECK(r.score <= 1.0);
    CHECK(r.method == ScoreMethod::kCosArcface);
  }
  CHECK_THROWS_AS(score_corpus(model, m, ScoreMethod::kCosArcface, provider, nullptr), Error);
  CHECK_THROWS_AS(score_corpus(model, m, ScoreMethod::kClsXent, provider), Error);
  CHECK_THROWS_AS(average_real_embedding(model, m, provider), Error);
}

TEST_CASE("partial failures are reported, not fatal") {
  TempDir dir;
  auto m = small_corpus(dir.path(), 50);
  Manifest broken(m.base_dir());
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto e = m[i];
    if (i == 37) e.audio_path = "audio/does_not_exist.wav";
    broken.add(e);
  }
  const auto model = init_model(NetConfig{80, 16, 8, HeadType::kBce}, ArcfaceConfig{}, 2);
  const auto r = score_corpus(model, broken, ScoreMethod::kClsXent, DspConfig{}, nullptr, {3, 8});
  CHECK(r.scores.size() == 99);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].utterance_id == m[37].id);
  for (const auto& rec : r.scores.records) CHECK(rec.utterance_id != m[37].id);
}

}  // TEST_SUITE
