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

#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "ttsel/pipeline.hpp"

namespace ttsel {

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got \"" + v + "\"");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got \"" + v + "\"");
  }
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

// One accessor pair per key, bound to a config instance.
std::vector<Field> fields(PipelineConfig& c) {
  std::vector<Field> f;
  auto integer = [&f](std::string key, int& ref) {
    f.push_back({key, [key, &ref](const std::string& v) { ref = parse_integer<int>(key, v); },
                 [&ref] { return std::to_string(ref); }});
  };
  auto real = [&f](std::string key, double& ref) {
    f.push_back({key, [key, &ref](const std::string& v) { ref = parse_real(key, v); }, [&ref] { return num(ref); }});
  };
  auto text = [&f](std::string key, std::string& ref) {
    f.push_back({key, [&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }});
  };

  f.push_back({"seed", [&c](const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v); },
               [&c] { return std::to_string(c.seed); }});
  integer("threads", c.threads);

  real("dsp.window_ms", c.dsp.window_ms);
  real("dsp.hop_ms", c.dsp.hop_ms);
  integer("dsp.fft_size", c.dsp.fft_size);
  integer("dsp.n_mels", c.dsp.n_mels);
  integer("dsp.n_mfcc", c.dsp.n_mfcc);
  real("dsp.fmin", c.dsp.fmin);
  real("dsp.fmax", c.dsp.fmax);
  real("dsp.log_floor", c.dsp.log_floor);

  integer("net.hidden", c.net.hidden);
  integer("net.embed_dim", c.net.embed_dim);
  f.push_back({"net.head",
               [&c](const std::string& v) {
                 try {
                   c.net.head = parse_head(v);
                 } catch (const Error& e) {
                   throw ConfigError(std::string("net.head: ") + e.what());
                 }
               },
               [&c] { return std::string(head_name(c.net.head)); }});

  integer("train.batch_size", c.train.batch_size);
  real("train.lr", c.train.lr);
  real("train.beta1", c.train.beta1);
  real("train.beta2", c.train.beta2);
  real("train.eps", c.train.eps);
  integer("train.max_epochs", c.train.max_epochs);
  integer("train.patience", c.train.patience);

  real("arcface.scale", c.arcface.scale);
  real("arcface.margin", c.arcface.margin);
  real("arcface.lr", c.arcface_lr);

  integer("ulm.k", c.ulm.k);
  integer("ulm.order", c.ulm.order);
  real("ulm.alpha", c.ulm.alpha);
  integer("ulm.max_iters", c.ulm.max_iters);
  f.push_back({"ulm.metric",
               [&c](const std::string& v) {
                 if (v == "acc") {
                   c.ulm.metric = ScoreMethod::kUlmAcc;
                 } else if (v == "ppl") {
                   c.ulm.metric = ScoreMethod::kUlmPpl;
                 } else {
                   throw ConfigError("ulm.metric: expected acc or ppl, got \"" + v + "\"");
                 }
               },
               [&c] { return std::string(c.ulm.metric == ScoreMethod::kUlmAcc ? "acc" : "ppl"); }});

  integer("toy.n_real", c.toy.n_real);
  integer("toy.n_synthetic", c.toy.n_synthetic);
  integer("toy.n_pool", c.toy.n_pool);
  integer("toy.n_eval", c.toy.n_eval);
  real("toy.min_duration", c.toy.min_duration_s);
  real("toy.max_duration", c.toy.max_duration_s);
  f.push_back({"toy.eval_words",
               [&c](const std::string& v) {
                 c.toy.eval_words.clear();
                 for (const auto& w : split(v, ',')) {
                   auto t = trim(w);
                   if (!t.empty()) c.toy.eval_words.push_back(std::move(t));
                 }
               },
               [&c] { return join(c.toy.eval_words, ','); }});
  real("toy.pool_eval_word_rate", c.toy.pool_eval_word_rate);
  real("toy.eval_eval_word_rate", c.toy.eval_eval_word_rate);

  text("select.cls", c.select_cls);
  text("select.cos", c.select_cos);
  text("select.ulm", c.select_ulm);
  text("analysis.ranges", c.analysis_ranges);

  text("paths.train", c.train_manifest);
  text("paths.dev", c.dev_manifest);
  text("paths.pool", c.pool_manifest);
  text("paths.eval", c.eval_manifest);
  text("paths.out", c.out_dir);
  text("paths.cache", c.cache_dir);
  return f;
}

void assign(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (auto& f : fields(cfg)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw ConfigError("unknown config key \"" + key + "\"");
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

std::vector<std::string> config_keys() {
  PipelineConfig c;
  std::vector<std::string> out;
  for (const auto& f : fields(c)) out.push_back(f.key);
  return out;
}

std::vector<SelectionRange> parse_ranges(std::string_view s) {
  std::vector<SelectionRange> out;
  for (const auto& part : split(s, ',')) {
    const auto t = trim(part);
    if (t.empty()) continue;
    const auto lh = split(t, ':');
    if (lh.size() != 2) throw ConfigError("analysis.ranges: expected lo:hi, got \"" + t + "\"");
    auto bound = [&](const std::string& v) {
      const auto b = trim(v);
      if (b == "inf") return std::numeric_limits<double>::infinity();
      if (b == "-inf") return -std::numeric_limits<double>::infinity();
      return parse_real("analysis.ranges", b);
    };
    try {
      out.emplace_back(bound(lh[0]), bound(lh[1]));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("analysis.ranges: ") + e.what());
    }
  }
  return out;
}

PipelineConfig parse_config_text(std::string_view text, std::string_view name) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(name) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = unquote(trim(line.substr(eq + 1)));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key \"" + key + "\"");
    try {
      assign(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig parse_config(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path.string()), path.string());
}

void apply_config_override(PipelineConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override \"" + std::string(assignment) + "\": expected key=value");
  }
  assign(cfg, trim(assignment.substr(0, eq)), unquote(trim(assignment.substr(eq + 1))));
}

void PipelineConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  };
  if (threads < 1) throw ConfigError("threads: must be >= 1");
  wrap([&] { dsp.validate(16000); });
  NetConfig n = net;
  n.input_dim = dsp.n_mels;
  wrap([&] { n.validate(); });
  wrap([&] { train.validate(); });
  wrap([&] { arcface.validate(); });
  if (!(arcface_lr > 0.0)) throw ConfigError("arcface.lr: must be > 0");
  if (ulm.k < 2) throw ConfigError("ulm.k: must be >= 2");
  if (ulm.order < 1 || ulm.order > 8) throw ConfigError("ulm.order: must be in [1, 8]");
  if (!(ulm.alpha > 0.0)) throw ConfigError("ulm.alpha: must be > 0");
  if (ulm.max_iters < 1) throw ConfigError("ulm.max_iters: must be >= 1");
  if (toy.n_real < 2 || toy.n_synthetic < 2) throw ConfigError("toy.n_real/toy.n_synthetic: need >= 2 each");
  if (toy.n_pool < 1) throw ConfigError("toy.n_pool: must be >= 1");
  if (toy.n_eval < 0) throw ConfigError("toy.n_eval: must be >= 0");
  if (!(toy.min_duration_s >= 1.0 && toy.min_duration_s <= toy.max_duration_s && toy.max_duration_s <= 10.0)) {
    throw ConfigError("toy.min_duration/toy.max_duration: need 1 <= min <= max <= 10");
  }
  for (const auto* r : {&toy.pool_eval_word_rate, &toy.eval_eval_word_rate}) {
    if (!(*r >= 0.0 && *r <= 1.0)) throw ConfigError("toy eval word rates must be in [0, 1]");
  }
  const std::pair<const char*, const std::string*> crit[] = {
      {"select.cls", &select_cls}, {"select.cos", &select_cos}, {"select.ulm", &select_ulm}};
  for (const auto& [key, value] : crit) {
    try {
      parse_criterion(*value, seed);
    } catch (const Error& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  }
  parse_ranges(analysis_ranges);
  const bool any = !train_manifest.empty() || !dev_manifest.empty() || !pool_manifest.empty();
  if (any && (train_manifest.empty() || dev_manifest.empty() || pool_manifest.empty())) {
    throw ConfigError("paths.train, paths.dev and paths.pool must be set together");
  }
  if (!eval_manifest.empty() && train_manifest.empty()) {
    throw ConfigError("paths.eval: requires paths.train, paths.dev and paths.pool");
  }
  if (out_dir.empty()) throw ConfigError("paths.out: must not be empty");
}

std::string PipelineConfig::canonical() const {
  PipelineConfig copy = *this;
  std::string out;
  for (const auto& f : fields(copy)) {
    if (f.key == "threads") continue;
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

TrainConfig PipelineConfig::train_for_head() const {
  TrainConfig t = train;
  t.seed = seed;
  if (net.head == HeadType::kArcface) t.lr = arcface_lr;
  return t;
}

std::filesystem::path PipelineConfig::cache_path() const {
  return cache_dir.empty() ? std::filesystem::path(out_dir) / "features" : std::filesystem::path(cache_dir);
}

}  // namespace ttsel
