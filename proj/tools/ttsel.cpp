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

// ttsel: synthetic-speech data selection pipeline.

#include <CLI11.hpp>
#include <iostream>

#include "ttsel/kernels.hpp"
#include "ttsel/pipeline.hpp"
#include "ttsel/select.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::vector<std::string> overrides;
  bool quiet = false;
};

ttsel::PipelineConfig resolve(const Globals& g) {
  ttsel::PipelineConfig cfg = g.config.empty() ? ttsel::PipelineConfig{} : ttsel::parse_config(g.config);
  for (const auto& o : g.overrides) ttsel::apply_config_override(cfg, o);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (!g.out.empty()) cfg.out_dir = g.out;
  cfg.validate();
  return cfg;
}

int run_stages(const Globals& g, ttsel::PipelineConfig cfg, const std::vector<std::string>& stages) {
  ttsel::RunOptions opts;
  if (!g.quiet) opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
  const auto outcomes = ttsel::run_pipeline(cfg, stages, opts);
  std::size_t ran = 0;
  for (const auto& o : outcomes) ran += !o.skipped;
  if (!g.quiet) {
    std::cerr << ran << " stage(s) run, " << outcomes.size() - ran << " up to date; outputs in " << cfg.out_dir
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score, select and fuse synthetic speech for ASR data augmentation."};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the run seed");
  app.add_option("--threads", g.threads, "Worker threads for featurization, quantization and scoring")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");
  app.add_flag("-q,--quiet", g.quiet, "Only report errors");

  std::string head, method, metric, criterion, scores_in, sel_out, fuse_a, fuse_b, stages_csv;
  auto* toy = app.add_subcommand("toy-corpus", "Generate the toy real/synthetic corpus");
  auto* feat = app.add_subcommand("featurize", "Compute log-mel and MFCC features into the cache");
  auto* train = app.add_subcommand("train-scorer", "Train the GRU scorer");
  train->add_option("--head", head, "bce or arcface")->check(CLI::IsMember({"bce", "arcface"}));
  auto* score = app.add_subcommand("score", "Score the synthetic pool with the trained scorer");
  score->add_option("--method", method, "cls (BCE softmax) or cos (Arcface similarity)")
      ->check(CLI::IsMember({"cls", "cos"}));
  auto* ulm_train = app.add_subcommand("ulm-train", "Train the k-means codebook and unit LM");
  auto* ulm_score = app.add_subcommand("ulm-score", "Score the pool with the unit LM");
  ulm_score->add_option("--metric", metric, "acc or ppl")->check(CLI::IsMember({"acc", "ppl"}));
  auto* sel = app.add_subcommand("select", "Select utterances from a score file");
  sel->add_option("--criterion", criterion, "range:LO:HI | top:P | bottom:P | random:P[:SEED]");
  sel->add_option("--scores", scores_in, "Standalone mode: score file to select from")->check(CLI::ExistingFile);
  sel->add_option("--output", sel_out, "Standalone mode: selection file to write");
  auto* fuse = app.add_subcommand("fuse", "Intersect the scorer and ULM selections");
  fuse->add_option("--a", fuse_a, "Standalone mode: first selection file")->check(CLI::ExistingFile);
  fuse->add_option("--b", fuse_b, "Standalone mode: second selection file")->check(CLI::ExistingFile);
  fuse->add_option("--output", sel_out, "Standalone mode: fused selection file to write");
  auto* analyze = app.add_subcommand("analyze", "Write the range and unseen-word report");
  auto* run = app.add_subcommand("run", "Run the pipeline end to end (cached stages are skipped)");
  run->add_option("--stages", stages_csv, "Comma-separated subset of stages");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");
  auto* info = app.add_subcommand("info", "Print the active compute kernels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*info) {
      std::cout << "kernels: " << ttsel::kernels::backend_name(ttsel::kernels::active_backend()) << "\n";
      return 0;
    }
    if (*sel && !scores_in.empty()) {
      if (criterion.empty() || sel_out.empty()) throw ttsel::Error("select --scores needs --criterion and --output");
      const auto cfg = resolve(g);
      const auto res = ttsel::select(ttsel::load_score_file(scores_in), ttsel::parse_criterion(criterion, cfg.seed));
      ttsel::save_selection(res, sel_out);
      if (!g.quiet) std::cerr << res.ids.size() << " of " << res.pool_size << " selected\n";
      return 0;
    }
    if (*fuse && (!fuse_a.empty() || !fuse_b.empty())) {
      if (fuse_a.empty() || fuse_b.empty() || sel_out.empty()) {
        throw ttsel::Error("fuse in standalone mode needs --a, --b and --output");
      }
      const auto res = ttsel::fuse_intersection(ttsel::load_selection(fuse_a), ttsel::load_selection(fuse_b),
                                                [](const std::string& w) { std::cerr << "warning: " << w << "\n"; });
      ttsel::save_selection(res, sel_out);
      if (!g.quiet) std::cerr << res.ids.size() << " ids in both selections\n";
      return 0;
    }

    auto cfg = resolve(g);
    if (*show) {
      std::cout << cfg.canonical();
      return 0;
    }
    if (!head.empty()) cfg.net.head = ttsel::parse_head(head);
    if (!method.empty()) cfg.net.head = method == "cls" ? ttsel::HeadType::kBce : ttsel::HeadType::kArcface;
    if (!metric.empty()) ttsel::apply_config_override(cfg, "ulm.metric=" + metric);
    if (!criterion.empty()) {
      ttsel::apply_config_override(cfg, std::string(cfg.net.head == ttsel::HeadType::kBce ? "select.cls=" : "select.cos=") + criterion);
    }
    cfg.validate();

    std::vector<std::string> stages;
    if (*toy) stages = {"toy-corpus"};
    if (*feat) stages = {"featurize"};
    if (*train) stages = {"train-scorer"};
    if (*score) stages = {"score"};
    if (*ulm_train) stages = {"ulm-train"};
    if (*ulm_score) stages = {"ulm-score"};
    if (*sel) stages = {"select"};
    if (*fuse) stages = {"fuse"};
    if (*analyze) stages = {"analyze"};
    if (*run) {
      if (stages_csv.empty()) {
        stages = ttsel::all_stages();
      } else {
        for (const auto& s : ttsel::split(stages_csv, ',')) stages.push_back(ttsel::trim(s));
      }
    }
    return run_stages(g, cfg, stages);
  } catch (const ttsel::StageError& e) {
    std::cerr << "error: stage " << e.what() << "\n";
    return 1;
  } catch (const ttsel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
