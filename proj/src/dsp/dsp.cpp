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

#include "ttsel/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "ttsel/common.hpp"

namespace ttsel {

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

int DspConfig::window_samples(int sample_rate) const {
  return static_cast<int>(std::lround(window_ms * sample_rate / 1000.0));
}

int DspConfig::hop_samples(int sample_rate) const {
  return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

void DspConfig::validate(int sample_rate) const {
  if (sample_rate <= 0) throw Error("dsp: sample_rate must be positive");
  if (window_samples(sample_rate) < 1) throw Error("dsp.window_ms: window must span >= 1 sample");
  if (hop_samples(sample_rate) < 1) throw Error("dsp.hop_ms: hop must span >= 1 sample");
  if (fft_size < window_samples(sample_rate)) {
    throw Error("dsp.fft_size: must be >= window length in samples (" +
                std::to_string(window_samples(sample_rate)) + ")");
  }
  if (n_mels < 1) throw Error("dsp.n_mels: must be >= 1");
  if (n_mfcc < 1 || n_mfcc > n_mels) throw Error("dsp.n_mfcc: must satisfy 1 <= n_mfcc <= n_mels");
  if (!(log_floor > 0.0)) throw Error("dsp.log_floor: must be > 0");
  if (fmin < 0.0 || upper_hz(sample_rate) <= fmin || upper_hz(sample_rate) > sample_rate / 2.0) {
    throw Error("dsp.fmin/fmax: need 0 <= fmin < fmax <= sample_rate/2");
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

std::vector<double> mel_filterbank(const DspConfig& cfg, int sample_rate) {
  const int bins = cfg.fft_size / 2 + 1;
  const double mlo = hz_to_mel(cfg.fmin);
  const double mhi = hz_to_mel(cfg.upper_hz(sample_rate));
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mlo + (mhi - mlo) * i / (cfg.n_mels + 1));
  }
  std::vector<double> fb(static_cast<std::size_t>(cfg.n_mels) * bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.fft_size;
      const double w = std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid));
      if (w > 0.0) fb[static_cast<std::size_t>(m) * bins + k] = w;
    }
  }
  return fb;
}

std::vector<double> dct2_orthonormal(std::span<const double> x, int n_out) {
  const auto n = static_cast<int>(x.size());
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (int k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x[i] * std::cos(M_PI * k * (2.0 * i + 1.0) / (2.0 * n));
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return out;
}

std::size_t frame_count(std::size_t n, const DspConfig& cfg, int sample_rate) {
  const auto window = static_cast<std::size_t>(cfg.window_samples(sample_rate));
  const auto hop = static_cast<std::size_t>(cfg.hop_samples(sample_rate));
  if (n < window) {
    throw Error("audio shorter than one analysis window (" + std::to_string(n) + " < " +
                std::to_string(window) + " samples)");
  }
  return 1 + (n - window) / hop;
}

struct FeatureExtractor::Plan {
  fftw_plan plan = nullptr;
};

FeatureExtractor::FeatureExtractor(const DspConfig& cfg, int sample_rate)
    : cfg_(cfg), sample_rate_(sample_rate), plan_(std::make_unique<Plan>()) {
  cfg_.validate(sample_rate);
  window_ = cfg_.window_samples(sample_rate);
  hop_ = cfg_.hop_samples(sample_rate);
  window_fn_ = hann_window(window_);

  const int bins = cfg_.fft_size / 2 + 1;
  const auto fb = mel_filterbank(cfg_, sample_rate);
  band_start_.assign(static_cast<std::size_t>(cfg_.n_mels), 0);
  band_weights_.resize(static_cast<std::size_t>(cfg_.n_mels));
  for (int m = 0; m < cfg_.n_mels; ++m) {
    const double* row = fb.data() + static_cast<std::size_t>(m) * bins;
    int first = 0, last = -1;
    for (int k = 0; k < bins; ++k) {
      if (row[k] > 0.0) {
        if (last < 0) first = k;
        last = k;
      }
    }
    band_start_[m] = first;
    if (last >= first) band_weights_[m].assign(row + first, row + last + 1);
  }

  dct_basis_.resize(static_cast<std::size_t>(cfg_.n_mfcc) * cfg_.n_mels);
  for (int k = 0; k < cfg_.n_mfcc; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / cfg_.n_mels);
    for (int i = 0; i < cfg_.n_mels; ++i) {
      dct_basis_[static_cast<std::size_t>(k) * cfg_.n_mels + i] =
          scale * std::cos(M_PI * k * (2.0 * i + 1.0) / (2.0 * cfg_.n_mels));
    }
  }

  std::lock_guard lock(planner_mutex());
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(static_cast<std::size_t>(cfg_.fft_size)));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(static_cast<std::size_t>(bins)));
  plan_->plan = fftw_plan_dft_r2c_1d(cfg_.fft_size, in.get(), out.get(), FFTW_ESTIMATE);
  if (!plan_->plan) throw Error("dsp: FFT plan creation failed");
}

FeatureExtractor::~FeatureExtractor() {
  if (plan_ && plan_->plan) {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_->plan);
  }
}

void FeatureExtractor::check_audio(const AudioBuffer& audio) const {
  if (audio.sample_rate != sample_rate_) {
    throw Error("dsp: audio sample rate " + std::to_string(audio.sample_rate) +
                " does not match extractor rate " + std::to_string(sample_rate_));
  }
}

Spectrogram FeatureExtractor::stft(const AudioBuffer& audio) const {
  check_audio(audio);
  Spectrogram s;
  s.frames = frame_count(audio.samples.size(), cfg_, sample_rate_);
  s.bins = static_cast<std::size_t>(cfg_.fft_size / 2 + 1);
  s.magnitude.resize(s.frames * s.bins);

  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(static_cast<std::size_t>(cfg_.fft_size)));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(s.bins));
  double* buf = in.get();
  for (std::size_t t = 0; t < s.frames; ++t) {
    const float* src = audio.samples.data() + t * static_cast<std::size_t>(hop_);
    for (int i = 0; i < window_; ++i) buf[i] = window_fn_[i] * static_cast<double>(src[i]);
    std::fill(buf + window_, buf + cfg_.fft_size, 0.0);
    fftw_execute_dft_r2c(plan_->plan, buf, out.get());
    double* dst = s.magnitude.data() + t * s.bins;
    for (std::size_t k = 0; k < s.bins; ++k) dst[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
  }
  return s;
}

std::vector<double> FeatureExtractor::log_mel_energies(const AudioBuffer& audio,
                                                       std::size_t* frames) const {
  const Spectrogram spec = stft(audio);
  const auto n_mels = static_cast<std::size_t>(cfg_.n_mels);
  std::vector<double> out(spec.frames * n_mels);
  std::vector<double> power(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      const double mag = spec.at(t, k);
      power[k] = mag * mag;
    }
    for (std::size_t m = 0; m < n_mels; ++m) {
      const auto& w = band_weights_[m];
      const double* p = power.data() + band_start_[m];
      double e = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * p[i];
      out[t * n_mels + m] = std::log(std::max(e, cfg_.log_floor));
    }
  }
  *frames = spec.frames;
  return out;
}

FeatureMatrix FeatureExtractor::log_mel(const AudioBuffer& audio) const {
  std::size_t frames = 0;
  const auto e = log_mel_energies(audio, &frames);
  FeatureMatrix f(frames, static_cast<std::size_t>(cfg_.n_mels), FeatureKind::kLogMel, cfg_.hop_ms);
  std::transform(e.begin(), e.end(), f.data.begin(), [](double v) { return static_cast<float>(v); });
  return f;
}

FeatureMatrix FeatureExtractor::mfcc(const AudioBuffer& audio) const {
  return log_mel_and_mfcc(audio).second;
}

std::pair<FeatureMatrix, FeatureMatrix> FeatureExtractor::log_mel_and_mfcc(
    const AudioBuffer& audio) const {
  std::size_t frames = 0;
  const auto e = log_mel_energies(audio, &frames);
  const auto n_mels = static_cast<std::size_t>(cfg_.n_mels);
  const auto n_mfcc = static_cast<std::size_t>(cfg_.n_mfcc);
  FeatureMatrix mel(frames, n_mels, FeatureKind::kLogMel, cfg_.hop_ms);
  FeatureMatrix cep(frames, n_mfcc, FeatureKind::kMfcc, cfg_.hop_ms);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = e.data() + t * n_mels;
    for (std::size_t m = 0; m < n_mels; ++m) mel.at(t, m) = static_cast<float>(row[m]);
    for (std::size_t k = 0; k < n_mfcc; ++k) {
      const double* basis = dct_basis_.data() + k * n_mels;
      double acc = 0.0;
      for (std::size_t m = 0; m < n_mels; ++m) acc += basis[m] * row[m];
      cep.at(t, k) = static_cast<float>(acc);
    }
  }
  return {std::move(mel), std::move(cep)};
}

Spectrogram stft(const AudioBuffer& audio, const DspConfig& cfg) {
  return FeatureExtractor(cfg, audio.sample_rate).stft(audio);
}

FeatureMatrix log_mel(const AudioBuffer& audio, const DspConfig& cfg) {
  return FeatureExtractor(cfg, audio.sample_rate).log_mel(audio);
}

FeatureMatrix mfcc(const AudioBuffer& audio, const DspConfig& cfg) {
  return FeatureExtractor(cfg, audio.sample_rate).mfcc(audio);
}

FeatureMatrix normalize_features(const FeatureMatrix& f) {
  FeatureMatrix out = f;
  if (f.frames == 0) return out;
  const double n = static_cast<double>(f.frames);
  for (std::size_t d = 0; d < f.dims; ++d) {
    double mean = 0.0;
    for (std::size_t t = 0; t < f.frames; ++t) mean += f.at(t, d);
    mean /= n;
    double var = 0.0;
    for (std::size_t t = 0; t < f.frames; ++t) {
      const double c = f.at(t, d) - mean;
      var += c * c;
    }
    var /= n;
    const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t t = 0; t < f.frames; ++t) {
      out.at(t, d) = static_cast<float>((f.at(t, d) - mean) * inv);
    }
  }
  return out;
}

}  // namespace ttsel
