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

#include "ttsel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "ttsel/analysis.hpp"
#include "ttsel/hash.hpp"
#include "ttsel/select.hpp"
#include "ttsel/threading.hpp"
#include "ttsel/ulm.hpp"

namespace ttsel {

namespace fs = std::filesystem;

namespace {

struct StageDef {
  std::string name;
  // Config keys the stage depends on: exact keys, or prefixes ending in '.'.
  std::vector<std::string> keys;
  std::vector<std::string> deps;
};

const std::vector<StageDef>& stage_defs() {
  static const std::vector<StageDef> defs = {
      {"toy-corpus", {"seed", "toy."}, {}},
      {"featurize", {"dsp."}, {"toy-corpus"}},
      {"train-scorer", {"seed", "net.", "train.", "arcface."}, {"featurize"}},
      {"score", {}, {"featurize", "train-scorer"}},
      {"ulm-train", {"seed", "ulm.k", "ulm.order", "ulm.alpha", "ulm.max_iters"}, {"featurize"}},
      {"ulm-score", {"ulm.metric"}, {"ulm-train"}},
      {"select", {"seed", "select."}, {"score", "ulm-score"}},
      {"fuse", {}, {"featurize", "select"}},
      {"analyze", {"seed", "analysis."}, {"featurize", "score", "select", "fuse"}},
  };
  return defs;
}

const StageDef& def_of(const std::string& name) {
  for (const auto& d : stage_defs()) {
    if (d.name == name) return d;
  }
  throw Error("unknown stage \"" + name + "\"");
}

nlohmann::ordered_json bound_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

bool key_matches(const std::string& key, const std::string& pattern) {
  if (!pattern.empty() && pattern.back() == '.') return key.rfind(pattern, 0) == 0;
  return key == pattern;
}

// Hash of every setting that can change an output. Paths and threads are
// excluded so that the same experiment hashes identically anywhere.
std::string config_hash(const PipelineConfig& cfg) {
  std::string text;
  for (const auto& line : split(cfg.canonical(), '\n')) {
    if (!line.empty() && line.rfind("paths.", 0) != 0) text += line + "\n";
  }
  return sha256_hex(text);
}

struct Stamp {
  std::string key;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
};

void ensure_parent(const fs::path& p) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  if (ec) throw Error("cannot create directory " + p.parent_path().string() + ": " + ec.message());
}

// Paths of each manifest entry's audio, rewritten relative to dir.
Manifest rebase(const Manifest& m, const fs::path& dir) {
  const auto abs_dir = fs::absolute(dir).lexically_normal();
  Manifest out(dir);
  for (const auto& e : m) {
    UtteranceEntry c = e;
    const auto abs = fs::absolute(m.resolve_audio(e)).lexically_normal();
    const auto rel = abs.lexically_relative(abs_dir);
    c.audio_path = (rel.empty() ? abs : rel).generic_string();
    out.add(std::move(c));
  }
  return out;
}

struct FeatureIndex {
  struct Files {
    std::string logmel, mfcc;
  };
  std::unordered_map<std::string, Files> by_id;
};

class Runner {
 public:
  Runner(const PipelineConfig& cfg, const RunOptions& opts) : cfg_(cfg), opts_(opts), out_(cfg.out_dir) {}

  std::vector<StageOutcome> run(const std::vector<std::string>& stages) {
    std::vector<StageOutcome> outcomes;
    for (const auto& name : stages) {
      try {
        const auto key = expected_key(name, name);
        const auto stamp = read_stamp(name);
        if (stamp && stamp->key == key && intact(*stamp)) {
          log(name + ": up to date");
          outcomes.push_back({name, true, key});
          continue;
        }
        log(name + ": running");
        const auto outputs = execute(name);
        Stamp s;
        s.key = key;
        for (const auto& p : outputs) s.outputs.emplace_back(p.string(), sha256_file(p.string()));
        write_stamp(name, s);
        fresh_.erase(name);
        outcomes.push_back({name, false, key});
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(name, e.what());
      }
    }
    return outcomes;
  }

 private:
  void log(const std::string& msg) const {
    if (opts_.log) opts_.log(msg);
  }

  fs::path at(const char* rel) const { return out_ / rel; }
  fs::path stamp_path(const std::string& stage) const { return out_ / "stamps" / (stage + ".json"); }

  std::optional<Stamp> read_stamp(const std::string& stage) const {
    const auto p = stamp_path(stage);
    if (!fs::exists(p)) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(read_text_file(p.string()));
      Stamp s;
      s.key = j.at("key").get<std::string>();
      for (const auto& o : j.at("outputs")) s.outputs.emplace_back(o.at(0).get<std::string>(), o.at(1).get<std::string>());
      return s;
    } catch (const std::exception&) {
      return std::nullopt;  // unreadable stamps just force a rerun
    }
  }

  void write_stamp(const std::string& stage, const Stamp& s) const {
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["key"] = s.key;
    j["config_hash"] = config_hash(cfg_);
    auto& outs = j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& [p, h] : s.outputs) outs.push_back({p, h});
    const auto path = stamp_path(stage);
    ensure_parent(path);
    write_text_file(path.string(), j.dump(1) + "\n");
  }

  static bool intact(const Stamp& s) {
    for (const auto& [p, h] : s.outputs) {
      if (!fs::exists(p) || sha256_file(p) != h) return false;
    }
    return true;
  }

  static std::string digest(const Stamp& s) {
    std::string text = s.key + "\n";
    for (const auto& [p, h] : s.outputs) text += fs::path(p).filename().string() + " " + h + "\n";
    return sha256_hex(text);
  }

  // Digest of a dependency's outputs; throws unless they exist, are
  // unmodified and were produced under the current configuration.
  std::string require_fresh(const std::string& dep, const std::string& requester) {
    if (auto it = fresh_.find(dep); it != fresh_.end()) return it->second;
    const auto stamp = read_stamp(dep);
    if (!stamp) {
      throw StageError(requester, "requires the output of stage \"" + dep + "\", which has not been run in " +
                                      out_.string() + "; run \"" + dep + "\" first");
    }
    if (!intact(*stamp)) {
      throw StageError(requester, "artifacts of stage \"" + dep + "\" are missing or were modified; rerun \"" +
                                      dep + "\"");
    }
    const auto want = expected_key(dep, requester);
    if (stamp->key != want) {
      throw StageError(requester, "artifacts of stage \"" + dep +
                                      "\" were produced under a different configuration (hash " +
                                      stamp->key.substr(0, 12) + ", expected " + want.substr(0, 12) +
                                      "); rerun \"" + dep + "\"");
    }
    return fresh_[dep] = digest(*stamp);
  }

  std::string expected_key(const std::string& stage, const std::string& requester) {
    const auto& d = def_of(stage);
    std::string text = "stage " + stage + "\n";
    for (const auto& line : split(cfg_.canonical(), '\n')) {
      const auto key = trim(line.substr(0, line.find('=')));
      if (std::any_of(d.keys.begin(), d.keys.end(), [&](const std::string& k) { return key_matches(key, k); })) {
        text += line + "\n";
      }
    }
    std::vector<std::string> unrun;
    for (const auto& dep : d.deps) {
      if (!(dep == "toy-corpus" && !cfg_.uses_toy_corpus()) && !fresh_.count(dep) && !read_stamp(dep)) {
        unrun.push_back(dep);
      }
    }
    if (!unrun.empty()) {
      std::string names;
      for (const auto& u : unrun) names += (names.empty() ? "\"" : ", \"") + u + "\"";
      throw StageError(requester, "requires the output of stage(s) " + names + ", not yet run in " + out_.string() +
                                      "; run them first");
    }
    for (const auto& dep : d.deps) {
      if (dep == "toy-corpus" && !cfg_.uses_toy_corpus()) {
        text += "corpus " + external_corpus_digest() + "\n";
        continue;
      }
      text += dep + " " + require_fresh(dep, requester) + "\n";
    }
    return sha256_hex(text);
  }

  std::string external_corpus_digest() {
    if (!external_digest_.empty()) return external_digest_;
    std::string text;
    for (const auto& role : {"train", "dev", "pool", "eval"}) {
      const auto p = manifest_path(role);
      if (p.empty()) continue;
      text += std::string(role) + " " + sha256_file(p.string()) + "\n";
      const auto m = load_manifest(p);
      for (const auto& e : m) text += e.id + " " + sha256_file(m.resolve_audio(e).string()) + "\n";
    }
    return external_digest_ = sha256_hex(text);
  }

  fs::path manifest_path(const std::string& role) const {
    if (cfg_.uses_toy_corpus()) {
      if (role == "train") return at(artifacts::kTrainManifest);
      if (role == "dev") return at(artifacts::kDevManifest);
      if (role == "pool") return at(artifacts::kPoolManifest);
      return at(artifacts::kEvalManifest);
    }
    if (role == "train") return cfg_.train_manifest;
    if (role == "dev") return cfg_.dev_manifest;
    if (role == "pool") return cfg_.pool_manifest;
    return cfg_.eval_manifest;
  }

  Manifest load_role(const std::string& role) const {
    const auto p = manifest_path(role);
    if (p.empty()) return Manifest();
    return load_manifest(p);
  }

  std::vector<fs::path> execute(const std::string& stage) {
    if (stage == "toy-corpus") return toy_corpus();
    if (stage == "featurize") return featurize();
    if (stage == "train-scorer") return train_stage();
    if (stage == "score") return score_stage();
    if (stage == "ulm-train") return ulm_train();
    if (stage == "ulm-score") return ulm_score();
    if (stage == "select") return select_stage();
    if (stage == "fuse") return fuse_stage();
    return analyze_stage();
  }

  // ---- stages ----

  std::vector<fs::path> toy_corpus() {
    const auto dir = out_ / "corpus";
    std::error_code ec;
    fs::remove_all(dir, ec);
    const auto& t = cfg_.toy;

    ToyCorpusSpec base;
    base.min_duration_s = t.min_duration_s;
    base.max_duration_s = t.max_duration_s;
    base.eval_only_words = t.eval_words;

    ToyCorpusSpec labeled = base;
    labeled.n_real = t.n_real;
    labeled.n_synthetic = t.n_synthetic;
    labeled.seed = derive_seed(cfg_.seed, "toy-labeled");
    labeled.id_prefix = "lab";
    const Manifest all = synthesize_toy_corpus(labeled, dir);

    // 75/25 split within each class.
    std::vector<bool> in_train(all.size(), false);
    Rng rng(derive_seed(cfg_.seed, "toy-split"));
    for (const Label label : {Label::kReal, Label::kSynthetic}) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].label == label) idx.push_back(i);
      }
      for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
      const auto n_train = static_cast<std::size_t>(std::lround(0.75 * static_cast<double>(idx.size())));
      for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
    }
    Manifest train(dir), dev(dir);
    for (std::size_t i = 0; i < all.size(); ++i) (in_train[i] ? train : dev).add(all[i]);

    ToyCorpusSpec pool_spec = base;
    pool_spec.n_real = 0;
    pool_spec.require_both_classes = false;
    pool_spec.n_synthetic = t.n_pool;
    pool_spec.seed = derive_seed(cfg_.seed, "toy-pool");
    pool_spec.id_prefix = "pool";
    pool_spec.eval_word_rate = t.eval_words.empty() ? 0.0 : t.pool_eval_word_rate;
    const Manifest pool = synthesize_toy_corpus(pool_spec, dir);

    Manifest eval(dir);
    if (t.n_eval > 0) {
      ToyCorpusSpec eval_spec = base;
      eval_spec.n_real = t.n_eval;
      eval_spec.n_synthetic = 0;
      eval_spec.require_both_classes = false;
      eval_spec.seed = derive_seed(cfg_.seed, "toy-eval");
      eval_spec.id_prefix = "eval";
      eval_spec.eval_word_rate = t.eval_words.empty() ? 0.0 : t.eval_eval_word_rate;
      eval = synthesize_toy_corpus(eval_spec, dir);
    }

    std::vector<fs::path> outputs;
    const std::pair<const char*, const Manifest*> files[] = {{artifacts::kTrainManifest, &train},
                                                             {artifacts::kDevManifest, &dev},
                                                             {artifacts::kPoolManifest, &pool},
                                                             {artifacts::kEvalManifest, &eval}};
    for (const auto& [rel, m] : files) {
      save_manifest(*m, at(rel));
      outputs.push_back(at(rel));
      for (const auto& e : *m) outputs.push_back(m->resolve_audio(e));
    }
    log("toy-corpus: " + std::to_string(train.size()) + " train, " + std::to_string(dev.size()) + " dev, " +
        std::to_string(pool.size()) + " pool, " + std::to_string(eval.size()) + " eval utterances");
    return outputs;
  }

  std::vector<fs::path> featurize() {
    struct Item {
      std::string id;
      fs::path audio;
    };
    std::vector<Item> items;
    std::unordered_map<std::string, fs::path> seen;
    for (const auto& role : {"train", "dev", "pool", "eval"}) {
      const auto m = load_role(role);
      for (const auto& e : m) {
        const auto audio = m.resolve_audio(e);
        if (auto it = seen.find(e.id); it != seen.end()) {
          if (it->second.lexically_normal() != audio.lexically_normal()) {
            throw Error("utterance id \"" + e.id + "\" appears in two manifests with different audio");
          }
          continue;
        }
        seen.emplace(e.id, audio);
        items.push_back({e.id, audio});
      }
    }
    const auto cache = cfg_.cache_path();
    std::error_code ec;
    fs::create_directories(cache, ec);
    if (ec) throw Error("cannot create feature cache " + cache.string() + ": " + ec.message());

    std::string dsp_text;
    for (const auto& line : split(cfg_.canonical(), '\n')) {
      if (line.rfind("dsp.", 0) == 0) dsp_text += line + "\n";
    }
    std::mutex mu;
    std::map<int, std::shared_ptr<FeatureExtractor>> extractors;
    std::vector<std::string> names(items.size()), errors(items.size());
    parallel_for(items.size(), cfg_.threads, [&](std::size_t i) {
      try {
        const auto name = sha256_hex(sha256_file(items[i].audio.string()) + "\n" + dsp_text).substr(0, 32);
        const auto lm = cache / (name + ".logmel"), mf = cache / (name + ".mfcc");
        if (!fs::exists(lm) || !fs::exists(mf)) {
          const auto audio = read_audio(items[i].audio);
          std::shared_ptr<FeatureExtractor> ex;
          {
            std::lock_guard lock(mu);
            auto& slot = extractors[audio.sample_rate];
            if (!slot) slot = std::make_shared<FeatureExtractor>(cfg_.dsp, audio.sample_rate);
            ex = slot;
          }
          const auto [logmel, mfcc] = ex->log_mel_and_mfcc(audio);
          // Write-then-rename so a crash never leaves a truncated cache entry.
          const auto tmp_lm = lm.string() + ".tmp" + std::to_string(i);
          const auto tmp_mf = mf.string() + ".tmp" + std::to_string(i);
          write_features(tmp_lm, logmel);
          write_features(tmp_mf, mfcc);
          fs::rename(tmp_lm, lm);
          fs::rename(tmp_mf, mf);
        }
        names[i] = name;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    std::string index;
    std::vector<fs::path> outputs{at(artifacts::kFeatureIndex)};
    std::size_t failed = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (names[i].empty()) {
        ++failed;
        log("featurize: skipping \"" + items[i].id + "\": " + errors[i]);
        continue;
      }
      index += items[i].id + "\t" + names[i] + ".logmel\t" + names[i] + ".mfcc\n";
      outputs.push_back(cache / (names[i] + ".logmel"));
      outputs.push_back(cache / (names[i] + ".mfcc"));
    }
    if (failed == items.size() && !items.empty()) throw Error("no utterance could be featurized");
    ensure_parent(at(artifacts::kFeatureIndex));
    write_text_file(at(artifacts::kFeatureIndex).string(), index);
    log("featurize: " + std::to_string(items.size() - failed) + " utterances");
    return outputs;
  }

  FeatureIndex load_index() const {
    FeatureIndex idx;
    for (const auto& line : split(read_text_file(at(artifacts::kFeatureIndex).string()), '\n')) {
      if (line.empty()) continue;
      const auto cols = split(line, '\t');
      if (cols.size() != 3) throw Error("corrupt feature index line: " + line);
      idx.by_id[cols[0]] = {cols[1], cols[2]};
    }
    return idx;
  }

  FeatureProvider provider(FeatureKind kind) const {
    auto idx = std::make_shared<FeatureIndex>(load_index());
    const auto cache = cfg_.cache_path();
    return [idx, cache, kind](const Manifest&, const UtteranceEntry& e) {
      const auto it = idx->by_id.find(e.id);
      if (it == idx->by_id.end()) throw Error("no features for \"" + e.id + "\" (featurize could not process it)");
      return read_features(cache / (kind == FeatureKind::kLogMel ? it->second.logmel : it->second.mfcc));
    };
  }

  NetConfig net_config() const {
    NetConfig n = cfg_.net;
    n.input_dim = cfg_.dsp.n_mels;
    return n;
  }

  ScoreMethod scorer_method() const {
    return cfg_.net.head == HeadType::kBce ? ScoreMethod::kClsXent : ScoreMethod::kCosArcface;
  }

  std::vector<fs::path> train_stage() {
    const auto train = load_role("train");
    const auto dev = load_role("dev");
    const auto features = provider(FeatureKind::kLogMel);
    std::string log_text = "epoch\ttrain_loss\tdev_uar\tdev_recall_real\tdev_recall_synthetic\n";
    const auto result = train_scorer(train, dev, net_config(), cfg_.arcface, cfg_.train_for_head(), features,
                                     [&](const EpochStats& s) {
                                       log_text += std::to_string(s.epoch) + "\t" + format_fixed(s.train_loss) +
                                                   "\t" + format_fixed(s.dev_uar) + "\t" +
                                                   format_fixed(s.dev_recall_real) + "\t" +
                                                   format_fixed(s.dev_recall_synthetic) + "\n";
                                       log("train-scorer: epoch " + std::to_string(s.epoch) + " loss " +
                                           format_fixed(s.train_loss, 4) + " dev UAR " + format_fixed(s.dev_uar, 4));
                                     });
    log_text += "best_epoch\t" + std::to_string(result.best_epoch) + "\n";
    ensure_parent(at(artifacts::kCheckpoint));
    save_checkpoint(result.model, at(artifacts::kCheckpoint));
    write_text_file(at(artifacts::kTrainLog).string(), log_text);
    std::vector<fs::path> outputs{at(artifacts::kCheckpoint), at(artifacts::kTrainLog)};
    if (cfg_.net.head == HeadType::kArcface) {
      const auto avg = average_real_embedding(result.model, train.with_label(Label::kReal), features, cfg_.threads);
      save_average_embedding(avg, at(artifacts::kAverageEmbedding));
      outputs.push_back(at(artifacts::kAverageEmbedding));
    }
    return outputs;
  }

  std::vector<fs::path> score_stage() {
    const auto model = load_checkpoint(at(artifacts::kCheckpoint));
    if (model.net.head != cfg_.net.head) throw Error("checkpoint head does not match net.head");
    std::optional<AverageRealEmbedding> avg;
    if (model.net.head == HeadType::kArcface) avg = load_average_embedding(at(artifacts::kAverageEmbedding));
    const auto features = provider(FeatureKind::kLogMel);
    ScoreOptions opts;
    opts.threads = cfg_.threads;
    std::vector<fs::path> outputs;
    const std::pair<const char*, const char*> jobs[] = {{"pool", artifacts::kScorerScores},
                                                        {"dev", artifacts::kDevScores}};
    for (const auto& [role, rel] : jobs) {
      const auto m = load_role(role);
      const auto res = score_corpus(model, m, scorer_method(), features, avg ? &*avg : nullptr, opts);
      for (const auto& f : res.failures) log("score: " + std::string(role) + " \"" + f.utterance_id + "\" failed: " + f.message);
      if (res.scores.empty() && !m.empty()) throw Error(std::string("every ") + role + " utterance failed to score");
      ensure_parent(at(rel));
      save_score_file(res.scores, at(rel));
      outputs.push_back(at(rel));
    }
    return outputs;
  }

  std::vector<fs::path> ulm_train() {
    const auto reals = load_role("train").with_label(Label::kReal);
    const auto pool = load_role("pool");
    const auto features = provider(FeatureKind::kMfcc);
    std::vector<FeatureMatrix> real_feats(reals.size());
    parallel_for(reals.size(), cfg_.threads, [&](std::size_t i) { real_feats[i] = features(reals, reals[i]); });
    std::vector<float> frames;
    for (const auto& f : real_feats) frames.insert(frames.end(), f.data.begin(), f.data.end());
    const auto cb = train_codebook(frames, cfg_.dsp.n_mfcc, cfg_.ulm.k, derive_seed(cfg_.seed, "codebook"),
                                   cfg_.ulm.max_iters);
    log("ulm-train: k-means " + std::to_string(cb.iterations) + " iterations, inertia " +
        format_fixed(cb.inertia_history.back(), 3));

    std::vector<UnitSequence> train_units(reals.size());
    for (std::size_t i = 0; i < reals.size(); ++i) train_units[i] = quantize(real_feats[i], cb, reals[i].id);
    std::vector<UnitSequence> pool_units(pool.size());
    std::vector<char> ok(pool.size(), 0);
    parallel_for(pool.size(), cfg_.threads, [&](std::size_t i) {
      try {
        pool_units[i] = quantize(features(pool, pool[i]), cb, pool[i].id);
        ok[i] = 1;
      } catch (const std::exception& e) {
        std::lock_guard lock(log_mu_);
        log("ulm-train: skipping \"" + pool[i].id + "\": " + e.what());
      }
    });
    std::vector<UnitSequence> pool_ok;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (ok[i]) pool_ok.push_back(std::move(pool_units[i]));
    }
    const auto lm = train_unit_lm(train_units, cfg_.ulm.k, cfg_.ulm.order, cfg_.ulm.alpha);

    ensure_parent(at(artifacts::kCodebook));
    save_codebook(cb, at(artifacts::kCodebook));
    write_text_file(at(artifacts::kTrainUnits).string(), unit_sequences_to_tsv(train_units));
    write_text_file(at(artifacts::kPoolUnits).string(), unit_sequences_to_tsv(pool_ok));
    write_text_file(at(artifacts::kUnitLm).string(), lm.to_json());
    return {at(artifacts::kCodebook), at(artifacts::kTrainUnits), at(artifacts::kPoolUnits), at(artifacts::kUnitLm)};
  }

  std::vector<fs::path> ulm_score() {
    const auto lm = NgramLm::from_json(read_text_file(at(artifacts::kUnitLm).string()));
    const auto units = parse_unit_sequences(read_text_file(at(artifacts::kPoolUnits).string()),
                                            at(artifacts::kPoolUnits).string());
    const auto scores = score_unit_sequences(lm, units, cfg_.ulm.metric);
    ensure_parent(at(artifacts::kUlmScores));
    save_score_file(scores, at(artifacts::kUlmScores));
    return {at(artifacts::kUlmScores)};
  }

  std::string scorer_criterion() const {
    return cfg_.net.head == HeadType::kBce ? cfg_.select_cls : cfg_.select_cos;
  }

  std::vector<fs::path> select_stage() {
    const auto a = select(load_score_file(at(artifacts::kScorerScores)), parse_criterion(scorer_criterion(), cfg_.seed));
    const auto b = select(load_score_file(at(artifacts::kUlmScores)), parse_criterion(cfg_.select_ulm, cfg_.seed));
    ensure_parent(at(artifacts::kScorerSelection));
    save_selection(a, at(artifacts::kScorerSelection));
    save_selection(b, at(artifacts::kUlmSelection));
    log("select: scorer " + std::to_string(a.ids.size()) + "/" + std::to_string(a.pool_size) + ", ulm " +
        std::to_string(b.ids.size()) + "/" + std::to_string(b.pool_size));
    auto side = [](const fs::path& p) { return fs::path(p.string() + ".json"); };
    return {at(artifacts::kScorerSelection), side(at(artifacts::kScorerSelection)), at(artifacts::kUlmSelection),
            side(at(artifacts::kUlmSelection))};
  }

  std::vector<fs::path> fuse_stage() {
    const auto a = load_selection(at(artifacts::kScorerSelection));
    const auto b = load_selection(at(artifacts::kUlmSelection));
    const auto fused = fuse_intersection(a, b, [&](const std::string& w) { log("fuse: warning: " + w); });
    save_selection(fused, at(artifacts::kFusedSelection));
    const auto reals = load_role("train").with_label(Label::kReal);
    const auto augmented = build_augmented_manifest(reals, load_role("pool"), fused);
    const auto out_path = at(artifacts::kAugmentedManifest);
    save_manifest(rebase(augmented, out_path.parent_path()), out_path);
    log("fuse: " + std::to_string(fused.ids.size()) + " utterances chosen by both, augmented manifest has " +
        std::to_string(augmented.size()));
    return {at(artifacts::kFusedSelection), fs::path(at(artifacts::kFusedSelection).string() + ".json"), out_path};
  }

  std::vector<fs::path> analyze_stage() {
    using nlohmann::ordered_json;
    const auto ranges = parse_ranges(cfg_.analysis_ranges);
    const auto scores = load_score_file(at(artifacts::kScorerScores));
    const auto ulm_scores = load_score_file(at(artifacts::kUlmScores));
    const auto train_reals = load_role("train").with_label(Label::kReal);
    const auto pool = load_role("pool");
    const auto eval = load_role("eval");

    ordered_json j;
    j["config_hash"] = config_hash(cfg_);
    const auto rep = selection_report(scores, ranges);
    j["scorer"] = {{"method", std::string(method_name(scorer_method()))},
                   {"ranges", ordered_json::parse(report_to_json(rep))}};
    if (scorer_method() == ScoreMethod::kClsXent) {
      const auto uar = evaluate_uar(load_score_file(at(artifacts::kDevScores)), load_role("dev"));
      j["scorer"]["dev_uar"] = uar.uar;
      j["scorer"]["dev_recall_real"] = uar.recall_real;
      j["scorer"]["dev_recall_synthetic"] = uar.recall_synthetic;
    }
    j["ulm"] = {{"metric", std::string(method_name(cfg_.ulm.metric))},
                {"ranges", ordered_json::parse(report_to_json(selection_report(ulm_scores, ranges)))}};

    const auto sel_scorer = load_selection(at(artifacts::kScorerSelection));
    const auto sel_ulm = load_selection(at(artifacts::kUlmSelection));
    const auto fused = load_selection(at(artifacts::kFusedSelection));
    auto sel_json = [](const SelectionResult& s) {
      return ordered_json{{"criterion", s.criterion},
                          {"selected", s.ids.size()},
                          {"pool_size", s.pool_size},
                          {"fraction", s.fraction()}};
    };
    j["selections"] = {{"scorer", sel_json(sel_scorer)}, {"ulm", sel_json(sel_ulm)}, {"fused", sel_json(fused)}};
    j["augmented_size"] = train_reals.size() + fused.ids.size();

    const auto vocab = vocabulary(train_reals, "train");
    const auto unseen = unseen_words(vocab, eval, pool);
    const auto containing = utterances_containing(pool, unseen.words);
    ordered_json uj;
    uj["train_vocabulary_size"] = vocab.size();
    uj["words"] = unseen.words;
    uj["count"] = unseen.count();
    uj["pool_utterances_containing"] = containing.count();
    auto& by_range = uj["by_range"] = ordered_json::array();
    for (const auto& r : unseen_by_range(scores, ranges, pool, unseen)) {
      by_range.push_back({{"low", bound_json(r.range.low)},
                          {"high", bound_json(r.range.high)},
                          {"words", r.words},
                          {"count", r.words.size()},
                          {"utterances", r.utterances}});
    }
    const auto crit = parse_criterion(scorer_criterion(), cfg_.seed);
    if (const auto* rc = std::get_if<RangeCriterion>(&crit)) {
      const auto filtered =
          replace_unseen_word_utterances(sel_scorer, scores, rc->range, pool, unseen.words, cfg_.seed);
      const std::unordered_set<std::string> before(sel_scorer.ids.begin(), sel_scorer.ids.end());
      std::size_t swapped_in = 0;
      for (const auto& id : filtered.ids) swapped_in += !before.count(id);
      uj["filter"] = {{"selected_before", sel_scorer.ids.size()},
                      {"removed", sel_scorer.ids.size() + swapped_in - filtered.ids.size()},
                      {"replaced", swapped_in},
                      {"selected_after", filtered.ids.size()}};
    }
    j["unseen_words"] = uj;

    ensure_parent(at(artifacts::kReport));
    write_text_file(at(artifacts::kReport).string(), j.dump(1) + "\n");
    write_text_file(at(artifacts::kHistogram).string(), histogram_text(rep));
    return {at(artifacts::kReport), at(artifacts::kHistogram)};
  }

  const PipelineConfig& cfg_;
  const RunOptions& opts_;
  fs::path out_;
  std::map<std::string, std::string> fresh_;
  std::string external_digest_;
  std::mutex log_mu_;
};

}  // namespace

const std::vector<std::string>& all_stages() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& d : stage_defs()) v.push_back(d.name);
    return v;
  }();
  return names;
}

std::vector<StageOutcome> run_pipeline(const PipelineConfig& cfg, const std::vector<std::string>& stages,
                                       const RunOptions& opts) {
  cfg.validate();
  for (const auto& s : stages) def_of(s);
  std::vector<std::string> ordered;
  for (const auto& name : all_stages()) {
    if (std::find(stages.begin(), stages.end(), name) == stages.end()) continue;
    if (name == "toy-corpus" && !cfg.uses_toy_corpus()) {
      if (stages.size() == 1) {
        throw StageError(name, "manifests are configured (paths.train); the toy corpus is not used");
      }
      continue;
    }
    ordered.push_back(name);
  }
  Runner runner(cfg, opts);
  return runner.run(ordered);
}

}  // namespace ttsel
