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

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sys/wait.h>

#include "test_support.hpp"
#include "ttsel/pipeline.hpp"
#include "ttsel/ulm.hpp"

using namespace ttsel;
using ttsel::test::TempDir;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config(const fs::path& out) {
  PipelineConfig c = parse_config_text(
      "toy.n_real = 12\n"
      "toy.n_synthetic = 12\n"
      "toy.n_pool = 16\n"
      "toy.n_eval = 6\n"
      "toy.min_duration = 1\n"
      "toy.max_duration = 1.5\n"
      "net.hidden = 16\n"
      "net.embed_dim = 8\n"
      "train.batch_size = 8\n"
      "train.max_epochs = 2\n"
      "ulm.k = 8\n"
      "select.ulm = top:0.5\n"
      "select.cls = range:0:1\n",
      "small");
  c.out_dir = out.string();
  c.threads = 2;
  return c;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TTSEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("empty config yields the reference defaults") {
  const auto c = parse_config_text("", "empty");
  CHECK(c.net.hidden == 256);
  CHECK(c.net.embed_dim == 64);
  CHECK(c.net.head == HeadType::kBce);
  CHECK(c.train.batch_size == 64);
  CHECK(c.train_for_head().lr == 1e-4);
  CHECK(c.arcface.scale == 10.0);
  CHECK(c.arcface.margin == 0.5);
  CHECK(c.ulm.k == 100);
  CHECK(c.dsp.n_mels == 80);
  CHECK(c.dsp.window_ms == 25.0);
  CHECK(c.dsp.hop_ms == 10.0);
  PipelineConfig arc = c;
  arc.net.head = HeadType::kArcface;
  CHECK(arc.train_for_head().lr == 1e-5);
  CHECK(c.canonical() == PipelineConfig{}.canonical());
}

TEST_CASE("config errors name the offending key") {
  CHECK_THROWS_WITH_AS(parse_config_text("arcface.margin = 2.0\n"), doctest::Contains("arcface.margin"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("net.hiden = 5\n"), doctest::Contains("net.hiden"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("# c\nseed = 1\nseed = 2\n", "f.cfg"), doctest::Contains("f.cfg:3"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("net.hidden = many\n"), doctest::Contains("net.hidden"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("just words\n"), doctest::Contains("key = value"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("ulm.metric = bleu\n"), doctest::Contains("ulm.metric"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("select.cls = range:0.5:0.2\n"), doctest::Contains("select.cls"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("paths.train = a.jsonl\n"), doctest::Contains("paths"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("dsp.fft_size = 128\n"), ConfigError);
}

TEST_CASE("config text round trip, comments and overrides") {
  auto c = parse_config_text("seed = 9   # trailing comment\n\nnet.head = \"arcface\"\nulm.metric = ppl\n");
  CHECK(c.seed == 9);
  CHECK(c.net.head == HeadType::kArcface);
  CHECK(c.ulm.metric == ScoreMethod::kUlmPpl);
  const auto again = parse_config_text(c.canonical());
  CHECK(again.canonical() == c.canonical());
  apply_config_override(c, "ulm.k=50");
  CHECK(c.ulm.k == 50);
  CHECK_THROWS_AS(apply_config_override(c, "nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_config_override(c, "ulm.k"), ConfigError);
  // Every key appears in the canonical text except threads.
  const auto text = c.canonical();
  for (const auto& k : config_keys()) {
    if (k != "threads") CHECK(text.find(k + " = ") != std::string::npos);
  }
}

TEST_CASE("analysis range parsing") {
  const auto r = parse_ranges("0:0.2, 0.2:0.5,0.5:inf");
  REQUIRE(r.size() == 3);
  CHECK(r[2].high == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(parse_ranges("0.5"), ConfigError);
  CHECK_THROWS_AS(parse_ranges("0.5:0.2"), ConfigError);
}

TEST_CASE("score before train-scorer is a dependency error") {
  TempDir dir;
  const auto cfg = small_config(dir.path());
  try {
    run_pipeline(cfg, {"score"});
    FAIL("expected a dependency error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "score");
    CHECK(std::string(e.what()).find("train-scorer") != std::string::npos);
  }
  CHECK_THROWS_AS(run_pipeline(cfg, {"no-such-stage"}), Error);
}

TEST_CASE("full run: artifacts, schema, caching and invalidation") {
  TempDir dir;
  const auto cfg = small_config(dir.path());
  const auto first = run_pipeline(cfg, all_stages());
  REQUIRE(first.size() == all_stages().size());
  for (const auto& o : first) CHECK(!o.skipped);

  const fs::path out = dir.path();
  for (const char* a : {artifacts::kTrainManifest, artifacts::kDevManifest, artifacts::kPoolManifest, artifacts::kEvalManifest,
                        artifacts::kFeatureIndex, artifacts::kCheckpoint, artifacts::kTrainLog, artifacts::kScorerScores,
                        artifacts::kDevScores, artifacts::kCodebook, artifacts::kTrainUnits, artifacts::kPoolUnits,
                        artifacts::kUnitLm, artifacts::kUlmScores, artifacts::kScorerSelection, artifacts::kUlmSelection,
                        artifacts::kFusedSelection, artifacts::kAugmentedManifest, artifacts::kReport, artifacts::kHistogram}) {
    CAPTURE(a);
    CHECK(fs::exists(out / a));
  }
  // Schema checks.
  const auto train = load_manifest(out / artifacts::kTrainManifest);
  const auto dev = load_manifest(out / artifacts::kDevManifest);
  const auto pool = load_manifest(out / artifacts::kPoolManifest);
  CHECK(train.size() == 18);
  CHECK(dev.size() == 6);
  CHECK(pool.size() == 16);
  CHECK(pool.count(Label::kSynthetic) == 16);
  const auto model = load_checkpoint(out / artifacts::kCheckpoint);
  CHECK(model.net.hidden == 16);
  const auto scores = load_score_file(out / artifacts::kScorerScores);
  REQUIRE(scores.size() == pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(scores.records[i].utterance_id == pool[i].id);
    CHECK(scores.records[i].method == ScoreMethod::kClsXent);
  }
  const auto ulm = load_score_file(out / artifacts::kUlmScores);
  CHECK(ulm.size() == pool.size());
  CHECK(ulm.records[0].method == ScoreMethod::kUlmAcc);
  const auto units = parse_unit_sequences(slurp(out / artifacts::kPoolUnits));
  CHECK(units.size() == pool.size());
  CHECK(load_codebook(out / artifacts::kCodebook).k == 8);
  const auto s1 = load_selection(out / artifacts::kScorerSelection);
  const auto s2 = load_selection(out / artifacts::kUlmSelection);
  const auto fused = load_selection(out / artifacts::kFusedSelection);
  CHECK(s1.ids.size() == 16);
  CHECK(s2.ids.size() == 8);
  CHECK(fused.ids.size() == 8);
  const auto aug = load_manifest(out / artifacts::kAugmentedManifest);
  CHECK(aug.size() == train.count(Label::kReal) + fused.ids.size());
  for (const auto& e : aug) CHECK(fs::exists(aug.resolve_audio(e)));
  const auto report = nlohmann::json::parse(slurp(out / artifacts::kReport));
  for (const char* k : {"config_hash", "scorer", "ulm", "selections", "augmented_size", "unseen_words"}) {
    CAPTURE(k);
    CHECK(report.contains(k));
  }
  CHECK(report["scorer"].contains("dev_uar"));
  CHECK(report["scorer"]["ranges"]["ranges"].size() == 3);
  CHECK(report["augmented_size"] == aug.size());
  const auto stamp = nlohmann::json::parse(slurp(out / "stamps" / "score.json"));
  CHECK(stamp["config_hash"] == report["config_hash"]);

  // Unchanged config: nothing recomputed, bytes untouched.
  const auto before = slurp(out / artifacts::kReport);
  for (const auto& o : run_pipeline(cfg, all_stages())) CHECK(o.skipped);
  CHECK(slurp(out / artifacts::kReport) == before);

  // A downstream-only change reruns only the affected stages.
  auto cfg2 = cfg;
  cfg2.select_ulm = "top:0.25";
  std::set<std::string> rerun;
  for (const auto& o : run_pipeline(cfg2, all_stages())) {
    if (!o.skipped) rerun.insert(o.stage);
  }
  CHECK(rerun == std::set<std::string>{"select", "fuse", "analyze"});

  // Thread count does not take part in cache keys.
  auto cfg3 = cfg2;
  cfg3.threads = 1;
  for (const auto& o : run_pipeline(cfg3, all_stages())) CHECK(o.skipped);

  // Tampered outputs are detected and regenerated.
  const auto good = slurp(out / artifacts::kScorerScores);
  write_text_file((out / artifacts::kScorerScores).string(), "id\tscore\tmethod\n");
  CHECK_THROWS_AS(run_pipeline(cfg2, {"select"}), StageError);
  std::set<std::string> redo;
  for (const auto& o : run_pipeline(cfg2, all_stages())) {
    if (!o.skipped) redo.insert(o.stage);
  }
  CHECK(redo.count("score") == 1);
  CHECK(redo.count("train-scorer") == 0);
  CHECK(slurp(out / artifacts::kScorerScores) == good);
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  const std::string out = "--out " + (dir.path() / "o").string();
  CHECK(run_cli("info") == 0);
  CHECK(run_cli(out + " config") == 0);
  CHECK(run_cli(out + " --set arcface.margin=2.0 config") == 2);
  CHECK(run_cli(out + " --set net.hiden=3 config") == 2);
  CHECK(run_cli(out + " score") == 1);
  CHECK(run_cli("no-such-command") != 0);

  // Standalone select and fuse over plain files.
  ScoreFile f;
  for (int i = 0; i < 10; ++i) f.records.push_back({"u" + std::to_string(i), i / 10.0, ScoreMethod::kExternal});
  save_score_file(f, dir / "s.tsv");
  const auto p = dir.path().string();
  CHECK(run_cli("select --scores " + p + "/s.tsv --criterion range:0.2:0.5 --output " + p + "/a.txt") == 0);
  CHECK(run_cli("select --scores " + p + "/s.tsv --criterion top:0.5 --output " + p + "/b.txt") == 0);
  CHECK(run_cli("fuse --a " + p + "/a.txt --b " + p + "/b.txt --output " + p + "/f.txt") == 0);
  CHECK(load_selection(dir / "a.txt").ids == std::vector<std::string>{"u2", "u3", "u4"});
  CHECK(load_selection(dir / "f.txt").ids.empty());
  CHECK(run_cli("select --scores " + p + "/s.tsv --criterion bogus --output " + p + "/c.txt") == 1);
}

}  // TEST_SUITE
