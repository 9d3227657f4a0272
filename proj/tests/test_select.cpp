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
#include <set>

#include "test_support.hpp"
#include "ttsel/select.hpp"

using namespace ttsel;
using ttsel::test::TempDir;

namespace {

ScoreFile make_scores(std::initializer_list<std::pair<const char*, double>> v) {
  ScoreFile f;
  for (const auto& [id, s] : v) f.records.push_back({id, s, ScoreMethod::kExternal});
  return f;
}

ScoreFile uniform_scores(std::uint64_t seed, std::size_t n, bool coarse = false) {
  Rng rng(seed);
  ScoreFile f;
  for (std::size_t i = 0; i < n; ++i) {
    double s = rng.uniform();
    // Coarse scores create many ties.
    if (coarse) s = std::floor(s * 20.0) / 20.0;
    f.records.push_back({"u" + std::to_string(rng.next_u64() % 1000000000) + "_" + std::to_string(i), s,
                         ScoreMethod::kExternal});
  }
  return f;
}

// Full sort by (score, id) in the wanted direction, take the first m, then
// restore score-file order.
std::vector<std::string> naive_extreme(const ScoreFile& f, std::size_t m, bool top) {
  std::vector<std::size_t> idx(f.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = f.records[a];
    const auto& rb = f.records[b];
    if (ra.score != rb.score) return top ? ra.score > rb.score : ra.score < rb.score;
    return ra.utterance_id < rb.utterance_id;
  });
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(f.records[i].utterance_id);
  return out;
}

std::vector<std::string> naive_range(const ScoreFile& f, double lo, double hi) {
  std::vector<std::string> out;
  for (const auto& r : f.records) {
    if (lo <= r.score && r.score < hi) out.push_back(r.utterance_id);
  }
  return out;
}

std::size_t naive_ceil(double p, std::size_t n) {
  // Exact for the decimal fractions used here: p is k/100.
  const auto k = static_cast<std::size_t>(std::llround(p * 100.0));
  return std::max<std::size_t>(1, (k * n + 99) / 100);
}

SelectionResult with_pool(std::vector<std::string> ids, std::vector<std::string> pool) {
  SelectionResult r;
  r.ids = std::move(ids);
  r.pool = std::move(pool);
  r.pool_size = r.pool.size();
  r.criterion = "test";
  return r;
}

}  // namespace

TEST_SUITE("select") {

TEST_CASE("range example and half-open boundaries") {
  const auto s = make_scores({{"a", 0.1}, {"b", 0.3}, {"c", 0.6}});
  CHECK(select(s, RangeCriterion{{0.2, 0.5}}).ids == std::vector<std::string>{"b"});
  const auto edge = make_scores({{"lo", 0.2}, {"hi", 0.5}, {"mid", 0.35}});
  const auto r = select(edge, RangeCriterion{{0.2, 0.5}});
  CHECK(r.ids == std::vector<std::string>{"lo", "mid"});
  CHECK(r.pool_size == 3);
  CHECK(r.fraction() == doctest::Approx(2.0 / 3.0));
  CHECK(r.criterion == "range:0.2:0.5");
  CHECK_THROWS_AS(SelectionRange(0.5, 0.5), Error);
  CHECK_THROWS_AS(SelectionRange(0.6, 0.5), Error);
}

TEST_CASE("top and bottom with ties broken by id") {
  const auto s = make_scores({{"d", 0.5}, {"b", 0.9}, {"a", 0.5}, {"c", 0.1}, {"e", 0.5}});
  // ceil(0.4 * 5) = 2: b, then the lowest id among the 0.5 ties.
  CHECK(select(s, TopFraction{0.4}).ids == std::vector<std::string>{"b", "a"});
  // Output follows score-file order.
  CHECK(select(s, BottomFraction{0.4}).ids == std::vector<std::string>{"a", "c"});
  CHECK(select(s, TopFraction{1.0}).ids.size() == 5);
  CHECK(select(s, TopFraction{0.01}).ids == std::vector<std::string>{"b"});
  CHECK_THROWS_AS(select(s, TopFraction{0.0}), Error);
  CHECK_THROWS_AS(select(s, TopFraction{1.5}), Error);
}

TEST_CASE("fraction count") {
  CHECK(fraction_count(0.07, 100) == 7);
  CHECK(fraction_count(0.3, 10) == 3);
  CHECK(fraction_count(0.36, 10000) == 3600);
  CHECK(fraction_count(0.301, 10) == 4);
  CHECK(fraction_count(0.001, 10) == 1);
  CHECK(fraction_count(1.0, 7) == 7);
  for (int k = 1; k <= 100; ++k) {
    for (std::size_t n : {1, 7, 99, 100, 1234, 10000}) CHECK(fraction_count(k / 100.0, n) == naive_ceil(k / 100.0, n));
  }
}

TEST_CASE("errors: empty file, duplicate ids, bad criteria") {
  CHECK_THROWS_WITH_AS(select(ScoreFile{}, TopFraction{0.3}), doctest::Contains("empty"), Error);
  CHECK_THROWS_WITH_AS(select(make_scores({{"a", 0.1}, {"a", 0.2}}), TopFraction{0.3}), doctest::Contains("\"a\""), Error);
  for (const char* bad : {"", "range:0.5", "range:0.5:0.2", "top", "top:x", "top:0", "middle:0.3", "random:0.3:abc"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_criterion(bad), Error);
  }
}

TEST_CASE("criterion text round trip") {
  for (const char* s : {"range:0.2:0.5", "top:0.36", "bottom:0.3", "random:0.3:7", "range:-inf:0.5", "range:0.5:inf"}) {
    CHECK(describe(parse_criterion(s)) == s);
  }
  CHECK(describe(parse_criterion("random:0.25", 42)) == "random:0.25:42");
  const auto c = parse_criterion("range:0.2:0.8");
  CHECK(std::get<RangeCriterion>(c).range.high == 0.8);
}

TEST_CASE("10 000 scores agree with a naive sort and filter") {
  for (bool coarse : {false, true}) {
    const auto f = uniform_scores(coarse ? 2 : 1, 10000, coarse);
    for (auto [lo, hi] : {std::pair{0.2, 0.5}, std::pair{0.0, 0.05}, std::pair{0.35, 0.85}}) {
      CHECK(select(f, RangeCriterion{{lo, hi}}).ids == naive_range(f, lo, hi));
    }
    for (double p : {0.01, 0.3, 0.36, 0.5, 0.99}) {
      CHECK(select(f, TopFraction{p}).ids == naive_extreme(f, naive_ceil(p, 10000), true));
      CHECK(select(f, BottomFraction{p}).ids == naive_extreme(f, naive_ceil(p, 10000), false));
    }
  }
}

TEST_CASE("random selection: size, reproducibility and overlap") {
  const auto f = uniform_scores(3, 10000);
  const auto a = select(f, RandomFraction{0.3, 1});
  const auto a2 = select(f, RandomFraction{0.3, 1});
  const auto b = select(f, RandomFraction{0.3, 2});
  CHECK(a.ids == a2.ids);
  CHECK(a.ids.size() == 3000);
  CHECK(std::set<std::string>(a.ids.begin(), a.ids.end()).size() == 3000);
  // Ids appear in score-file order.
  std::size_t pos = 0;
  for (const auto& id : a.ids) {
    while (pos < f.size() && f.records[pos].utterance_id != id) ++pos;
    CHECK(pos < f.size());
  }
  const std::set<std::string> sa(a.ids.begin(), a.ids.end());
  std::size_t overlap = 0;
  for (const auto& id : b.ids) overlap += sa.count(id);
  // Hypergeometric: mean m^2/N, variance m (m/N) (1 - m/N) (N - m)/(N - 1).
  const double N = 10000, m = 3000;
  const double mean = m * m / N;
  const double sd = std::sqrt(m * (m / N) * (1 - m / N) * (N - m) / (N - 1));
  CHECK(std::abs(static_cast<double>(overlap) - mean) <= 3 * sd);
}

TEST_CASE("range selection is idempotent and top/bottom cover the pool") {
  const auto f = uniform_scores(4, 2000);
  const auto r = select(f, RangeCriterion{{0.2, 0.5}});
  ScoreFile sub;
  const std::set<std::string> keep(r.ids.begin(), r.ids.end());
  for (const auto& rec : f.records) {
    if (keep.count(rec.utterance_id)) sub.records.push_back(rec);
  }
  CHECK(select(sub, RangeCriterion{{0.2, 0.5}}).ids == r.ids);
  for (double p : {0.1, 0.3, 0.77}) {
    const auto t = select(f, TopFraction{p});
    const auto b = select(f, BottomFraction{1.0 - p});
    std::set<std::string> all(t.ids.begin(), t.ids.end());
    all.insert(b.ids.begin(), b.ids.end());
    CHECK(all.size() == f.size());
  }
}

TEST_CASE("fusion is set intersection in the order of the first input") {
  CHECK(fuse_intersection(with_pool({"a", "b"}, {"a", "b", "c", "d"}), with_pool({"c", "d"}, {"a", "b", "c", "d"})).ids.empty());
  const auto sub = fuse_intersection(with_pool({"d", "b"}, {"a", "b", "c", "d"}), with_pool({"a", "b", "c", "d"}, {"a", "b", "c", "d"}));
  CHECK(sub.ids == std::vector<std::string>{"d", "b"});

  Rng rng(5);
  std::vector<std::string> pool;
  for (int i = 0; i < 500; ++i) pool.push_back("p" + std::to_string(i));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> a, b;
    const double pa = rng.uniform(), pb = rng.uniform();
    for (const auto& id : pool) {
      if (rng.uniform() < pa) a.push_back(id);
      if (rng.uniform() < pb) b.push_back(id);
    }
    bool warned = false;
    const auto r = fuse_intersection(with_pool(a, pool), with_pool(b, pool), [&](const std::string&) { warned = true; });
    CHECK(!warned);
    std::vector<std::string> sa(a), sb(b), want;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(want));
    std::vector<std::string> got(r.ids);
    std::sort(got.begin(), got.end());
    CHECK(got == want);
    CHECK(r.ids.size() <= std::min(a.size(), b.size()));
    CHECK(r.pool_size == 500);
  }
}

TEST_CASE("fusion across different pools warns and restricts") {
  std::string msg;
  const auto r = fuse_intersection(with_pool({"a", "b", "x"}, {"a", "b", "c", "x"}), with_pool({"a", "x", "y"}, {"a", "b", "y", "x"}),
                                   [&](const std::string& w) { msg = w; });
  CHECK(msg.find("different pools") != std::string::npos);
  CHECK(r.ids == std::vector<std::string>{"a", "x"});
  CHECK(r.pool_size == 3);
}

TEST_CASE("augmented manifest") {
  Manifest base, pool;
  base.add({"r1", "r1.wav", "a", Label::kReal});
  base.add({"r2", "r2.wav", "b", Label::kReal});
  for (int i = 0; i < 4; ++i) pool.add({"s" + std::to_string(i), "s.wav", "c", Label::kSynthetic});
  std::vector<std::string> ids;
  for (const auto& e : pool) ids.push_back(e.id);
  CHECK(build_augmented_manifest(base, pool, with_pool({}, ids)) == base);
  const auto full = build_augmented_manifest(base, pool, with_pool(ids, ids));
  CHECK(full.size() == 6);
  CHECK(full[2].label == Label::kSynthetic);
  const auto some = build_augmented_manifest(base, pool, with_pool({"s3", "s1"}, ids));
  REQUIRE(some.size() == 4);
  CHECK(some[2].id == "s3");
  CHECK(some[3].id == "s1");
  CHECK_THROWS_WITH_AS(build_augmented_manifest(base, pool, with_pool({"zz"}, ids)), doctest::Contains("zz"), Error);
}

TEST_CASE("augmented manifest rebases relative audio paths") {
  Manifest base(std::filesystem::path("/data/real")), pool(std::filesystem::path("/data/tts"));
  base.add({"r", "r.wav", "", Label::kReal});
  pool.add({"s", "audio/s.wav", "", Label::kSynthetic});
  const auto m = build_augmented_manifest(base, pool, with_pool({"s"}, {"s"}));
  CHECK(m.resolve_audio(m[1]).lexically_normal() == std::filesystem::path("/data/tts/audio/s.wav"));
}

TEST_CASE("selection file and sidecar") {
  TempDir dir;
  const auto f = uniform_scores(6, 50);
  const auto r = select(f, TopFraction{0.3});
  save_selection(r, dir / "sel.txt");
  const auto text = read_text_file((dir / "sel.txt").string());
  CHECK(std::count(text.begin(), text.end(), '\n') == 15);
  CHECK(std::filesystem::exists(dir / "sel.txt.json"));
  const auto back = load_selection(dir / "sel.txt");
  CHECK(back.ids == r.ids);
  CHECK(back.pool == r.pool);
  CHECK(back.pool_size == 50);
  CHECK(back.criterion == "top:0.3");
  write_text_file((dir / "sel.txt").string(), "only_one\n");
  CHECK_THROWS_AS(load_selection(dir / "sel.txt"), Error);
}

}  // TEST_SUITE
