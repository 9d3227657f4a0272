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

#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ttsel/corpus.hpp"

namespace ttsel {

struct DspConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  int n_mels = 80;
  int n_mfcc = 13;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  double log_floor = 1e-10;

  int window_samples(int sample_rate) const;
  int hop_samples(int sample_rate) const;
  double upper_hz(int sample_rate) const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
  // Throws Error naming the violated field.
  void validate(int sample_rate) const;

  bool operator==(const DspConfig&) const = default;
};

enum class FeatureKind : int { kLogMel = 0, kMfcc = 1 };

// Time-major T x D feature matrix.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<float> data;
  double frame_hop_ms = 10.0;
  FeatureKind kind = FeatureKind::kLogMel;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d, FeatureKind k, double hop_ms)
      : frames(t), dims(d), data(t * d, 0.0f), frame_hop_ms(hop_ms), kind(k) {}

  float& at(std::size_t t, std::size_t d) { return data[t * dims + d]; }
  float at(std::size_t t, std::size_t d) const { return data[t * dims + d]; }
  std::span<const float> row(std::size_t t) const { return {data.data() + t * dims, dims}; }
  std::span<float> row(std::size_t t) { return {data.data() + t * dims, dims}; }

  bool operator==(const FeatureMatrix&) const = default;
};

// Magnitude spectrogram, T x (fft_size / 2 + 1), double precision.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> magnitude;

  double at(std::size_t t, std::size_t k) const { return magnitude[t * bins + k]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// Triangular HTK-mel filters over the rfft bins; row-major n_mels x bins.
std::vector<double> mel_filterbank(const DspConfig& cfg, int sample_rate);

// Orthonormal DCT-II of x, keeping the first n_out coefficients.
std::vector<double> dct2_orthonormal(std::span<const double> x, int n_out);

// Frame count for n samples: 1 + floor((n - window) / hop). Throws when
// n < window.
std::size_t frame_count(std::size_t n, const DspConfig& cfg, int sample_rate);

// Reusable front end for one (config, sample rate) pair. Construction builds
// the window, filterbank, DCT basis and FFT plan; the const methods are safe
// to call concurrently.
class FeatureExtractor {
 public:
  FeatureExtractor(const DspConfig& cfg, int sample_rate);
  ~FeatureExtractor();
  FeatureExtractor(const FeatureExtractor&) = delete;
  FeatureExtractor& operator=(const FeatureExtractor&) = delete;

  const DspConfig& config() const { return cfg_; }
  int sample_rate() const { return sample_rate_; }

  Spectrogram stft(const AudioBuffer& audio) const;
  FeatureMatrix log_mel(const AudioBuffer& audio) const;
  FeatureMatrix mfcc(const AudioBuffer& audio) const;
  // Both at once, sharing the STFT.
  std::pair<FeatureMatrix, FeatureMatrix> log_mel_and_mfcc(const AudioBuffer& audio) const;

 private:
  std::vector<double> log_mel_energies(const AudioBuffer& audio, std::size_t* frames) const;
  void check_audio(const AudioBuffer& audio) const;

  DspConfig cfg_;
  int sample_rate_;
  int window_;
  int hop_;
  std::vector<double> window_fn_;
  // Sparse triangular filters: per mel band, first bin and weights.
  std::vector<int> band_start_;
  std::vector<std::vector<double>> band_weights_;
  std::vector<double> dct_basis_;  // n_mfcc x n_mels
  struct Plan;
  std::unique_ptr<Plan> plan_;
};

Spectrogram stft(const AudioBuffer& audio, const DspConfig& cfg);
FeatureMatrix log_mel(const AudioBuffer& audio, const DspConfig& cfg);
FeatureMatrix mfcc(const AudioBuffer& audio, const DspConfig& cfg);

// Per-utterance standardization: every dimension gets mean 0 and, where the
// input variance exceeds 1e-12, variance 1 (population variance).
FeatureMatrix normalize_features(const FeatureMatrix& f);

// Feature cache file: "TTSF", u32 kind, u32 T, u32 D, f32 hop_ms, then
// T*D little-endian f32 row-major.
void write_features(const std::filesystem::path& path, const FeatureMatrix& f);
FeatureMatrix read_features(const std::filesystem::path& path);

}  // namespace ttsel
