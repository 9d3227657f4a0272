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
#include <cstdio>
#include <set>

#include "ttsel/common.hpp"
#include "ttsel/corpus.hpp"

namespace ttsel {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kPeak = 0.5;

void validate(const ToyCorpusSpec& spec) {
  const int min_each = spec.require_both_classes ? 1 : 0;
  if (spec.n_real < min_each || spec.n_synthetic < min_each || spec.n_real + spec.n_synthetic < 1) {
    throw Error("invalid toy corpus spec: need at least one utterance (got " +
                std::to_string(spec.n_real) + " real, " + std::to_string(spec.n_synthetic) +
                " synthetic)");
  }
  if (!(spec.min_duration_s >= 1.0 && spec.max_duration_s <= 10.0 &&
        spec.min_duration_s <= spec.max_duration_s)) {
    throw Error("invalid toy corpus spec: durations must satisfy 1 <= min <= max <= 10 seconds");
  }
  if (spec.sample_rate < 8000) throw Error("invalid toy corpus spec: sample_rate must be >= 8000");
  if (spec.min_words < 1 || spec.max_words < spec.min_words) {
    throw Error("invalid toy corpus spec: need 1 <= min_words <= max_words");
  }
  if (spec.eval_word_rate < 0.0 || spec.eval_word_rate > 1.0) {
    throw Error("invalid toy corpus spec: eval_word_rate must be in [0, 1]");
  }
  if (spec.eval_word_rate > 0.0 && spec.eval_only_words.empty()) {
    throw Error("invalid toy corpus spec: eval_word_rate > 0 requires eval_only_words");
  }
}

// Sum of phase-locked harmonics k*phase, k = 1..n, with amplitude amp(k),
// evaluated with the Chebyshev recurrence sin(k x) = 2 cos x sin((k-1) x) - sin((k-2) x).
template <typename AmpFn>
double harmonic_sum(double phase, int n, AmpFn amp) {
  const double c2 = 2.0 * std::cos(phase);
  double s_prev = 0.0;
  double s_cur = std::sin(phase);
  double acc = 0.0;
  for (int k = 1; k <= n; ++k) {
    acc += amp(k) * s_cur;
    const double s_next = c2 * s_cur - s_prev;
    s_prev = s_cur;
    s_cur = s_next;
  }
  return acc;
}

void normalize_peak(std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak <= 0.0) return;
  const double g = kPeak / peak;
  for (double& v : x) v *= g;
}

std::vector<double> real_like(Rng& rng, std::size_t n, int sr) {
  const double f0 = rng.uniform(100.0, 220.0);
  const double vib_rate = rng.uniform(3.0, 6.0);
  const double vib_phase = rng.uniform(0.0, kTwoPi);
  const double syl_rate = rng.uniform(3.0, 5.0);
  const double syl_phase = rng.uniform(0.0, kTwoPi);
  const double max_freq = 6000.0;
  const int n_harm = static_cast<int>(max_freq / (f0 * 1.2));
  // Pitch random walk, one step per 10 ms, linearly interpolated.
  const std::size_t step = static_cast<std::size_t>(sr / 100);
  std::vector<double> walk(n / step + 2);
  double w = 0.0;
  for (auto& v : walk) {
    w = std::clamp(w + 0.01 * rng.normal(), -0.15, 0.15);
    v = w;
  }
  std::vector<double> out(n);
  double phase = rng.uniform(0.0, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double frac = static_cast<double>(i % step) / static_cast<double>(step);
    const double jitter = walk[i / step] * (1.0 - frac) + walk[i / step + 1] * frac;
    const double f = f0 * (1.0 + 0.06 * std::sin(kTwoPi * vib_rate * t + vib_phase) + jitter);
    phase = std::fmod(phase + kTwoPi * f / sr, kTwoPi);
    const double env = 0.25 + 0.75 * std::pow(std::sin(M_PI * syl_rate * t + syl_phase), 2.0);
    out[i] = env * harmonic_sum(phase, n_harm, [](int k) { return 1.0 / std::sqrt(double(k)); });
  }
  normalize_peak(out);
  for (double& v : out) v += 0.003 * rng.normal();
  return out;
}

std::vector<double> synthetic_like(Rng& rng, std::size_t n, int sr) {
  const double f0 = rng.uniform(90.0, 140.0);
  const int n_harm = static_cast<int>(1200.0 / f0);
  std::vector<double> out(n);
  const double dphase = kTwoPi * f0 / sr;
  double phase = rng.uniform(0.0, kTwoPi);
  for (std::size_t i = 0; i < n; ++i) {
    phase = std::fmod(phase + dphase, kTwoPi);
    out[i] = harmonic_sum(phase, n_harm, [](int) { return 1.0; });
  }
  normalize_peak(out);
  return out;
}

std::string make_transcript(Rng& rng, const ToyCorpusSpec& spec,
                            const std::vector<std::string>& vocab) {
  const int n_words =
      spec.min_words + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_words - spec.min_words + 1)));
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(n_words));
  for (int i = 0; i < n_words; ++i) words.push_back(vocab[rng.below(vocab.size())]);
  if (spec.eval_word_rate > 0.0 && rng.uniform() < spec.eval_word_rate) {
    const auto pos = rng.below(words.size());
    words[pos] = spec.eval_only_words[rng.below(spec.eval_only_words.size())];
  }
  std::string t;
  for (const auto& w : words) {
    if (!t.empty()) t += ' ';
    t += w;
  }
  return t;
}

}  // namespace

Manifest synthesize_toy_corpus(const ToyCorpusSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  std::vector<std::string> vocab = spec.words;
  if (vocab.empty()) {
    const std::set<std::string> reserved(spec.eval_only_words.begin(), spec.eval_only_words.end());
    for (const auto& w : default_word_list()) {
      if (!reserved.contains(w)) vocab.push_back(w);
    }
  }
  if (vocab.empty()) throw Error("invalid toy corpus spec: empty word list");

  const auto audio_dir = out_dir / "audio";
  std::error_code ec;
  std::filesystem::create_directories(audio_dir, ec);
  if (ec) throw Error("cannot create output directory " + audio_dir.string() + ": " + ec.message());

  Manifest m(out_dir);
  auto emit = [&](Label label, int index) {
    char id[128];
    std::snprintf(id, sizeof id, "%s_%s_%04d", spec.id_prefix.c_str(),
                  label == Label::kReal ? "real" : "syn", index);
    Rng rng(derive_seed(spec.seed, id));
    const double dur = rng.uniform(spec.min_duration_s, spec.max_duration_s);
    const auto n = static_cast<std::size_t>(std::lround(dur * spec.sample_rate));
    const auto signal =
        label == Label::kReal ? real_like(rng, n, spec.sample_rate) : synthetic_like(rng, n, spec.sample_rate);
    AudioBuffer audio;
    audio.sample_rate = spec.sample_rate;
    audio.samples.assign(signal.begin(), signal.end());
    const std::string rel = std::string("audio/") + id + ".wav";
    write_audio(out_dir / rel, audio);
    m.add(UtteranceEntry{id, rel, make_transcript(rng, spec, vocab), label});
  };
  for (int i = 0; i < spec.n_real; ++i) emit(Label::kReal, i);
  for (int i = 0; i < spec.n_synthetic; ++i) emit(Label::kSynthetic, i);
  return m;
}

}  // namespace ttsel
