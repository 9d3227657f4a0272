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

// Two-layer GRU scoring network with a tanh fully-connected embedding and
// either a two-way softmax (BCE) head or an additive-angular-margin (Arcface)
// head. Forward and backward passes are written out by hand for this fixed
// architecture; gradients are exact (backprop through time over the masked,
// padded batch).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ttsel/corpus.hpp"
#include "ttsel/dsp.hpp"

namespace ttsel {

enum class HeadType : int { kBce = 0, kArcface = 1 };

std::string_view head_name(HeadType h);
HeadType parse_head(std::string_view s);

struct NetConfig {
  int input_dim = 80;
  int hidden = 256;
  int embed_dim = 64;
  HeadType head = HeadType::kBce;

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct ArcfaceConfig {
  double scale = 10.0;
  double margin = 0.5;  // radians
  int n_classes = 2;

  void validate() const;
  bool operator==(const ArcfaceConfig&) const = default;
};

struct TrainConfig {
  int batch_size = 64;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 1;

  // 1e-4 for the BCE head, 1e-5 for Arcface.
  static TrainConfig defaults_for(HeadType head);
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Location of one parameter block inside the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// Fixed parameter order (also the checkpoint order):
//   gru1.wx  [input_dim x 3H]   input weights, columns = [reset | update | candidate]
//   gru1.wh  [H x 3H]           recurrent weights, same column blocks
//   gru1.bx  [3H]               input-side biases
//   gru1.bh  [3H]               recurrent-side biases
//   gru2.wx  [H x 3H], gru2.wh [H x 3H], gru2.bx [3H], gru2.bh [3H]
//   fc.w     [E x H], fc.b [E]
//   BCE:     head.w [2 x E], head.b [2]
//   Arcface: head.w [n_classes x E]   (class-weight rows, no bias)
struct ParamLayout {
  ParamBlock gru_wx[2], gru_wh[2], gru_bx[2], gru_bh[2];
  ParamBlock fc_w, fc_b, head_w, head_b;
  std::size_t total = 0;

  static ParamLayout make(const NetConfig& net, const ArcfaceConfig& arc);
  std::vector<const ParamBlock*> blocks() const;
  // Block containing flat index i.
  const ParamBlock& block_of(std::size_t i) const;
};

// Per-dimension input standardization applied before the first GRU layer.
// Estimated from the training set; identity by default.
struct InputNorm {
  std::vector<float> mean;
  std::vector<float> inv_std;

  static InputNorm identity(int dim);
  bool operator==(const InputNorm&) const = default;
};

template <typename T>
struct ScorerModelT {
  NetConfig net;
  ArcfaceConfig arcface;
  ParamLayout layout;
  InputNorm norm;
  std::vector<T> params;

  T* data(const ParamBlock& b) { return params.data() + b.offset; }
  const T* data(const ParamBlock& b) const { return params.data() + b.offset; }
};

using ScorerModel = ScorerModelT<float>;

// GRU/fc weights uniform in +-1/sqrt(fan_in), biases zero, Arcface class rows
// uniform on the unit sphere.
ScorerModel init_model(const NetConfig& net, const ArcfaceConfig& arc, std::uint64_t seed);
ScorerModelT<double> to_double(const ScorerModel& m);

// One utterance (features must be log-mel with input_dim columns) and label
// (1 = real, 0 = synthetic).
struct Example {
  const FeatureMatrix* features = nullptr;
  int label = 0;
};

// Embeddings for a batch of utterances, row-major B x E. Each row is
// bit-identical to what a single-utterance call produces.
template <typename T>
std::vector<T> embed_batch(const ScorerModelT<T>& model, std::span<const FeatureMatrix* const> batch);

template <typename T>
std::vector<T> forward_embedding(const ScorerModelT<T>& model, const FeatureMatrix& features);

// Mean loss over the batch. When grad is non-null it is resized to the
// parameter count and filled with d(loss)/d(params).
template <typename T>
T compute_loss(const ScorerModelT<T>& model, std::span<const Example> batch, std::vector<T>* grad);

// ---- heads, exposed for testing ----

// Two-way softmax cross-entropy for one embedding. Returns the loss and
// accumulates weight * gradients into d_w (2 x E), d_b (2) and d_e (E);
// any of them may be null.
template <typename T>
T bce_head_loss(const T* w, const T* b, const T* e, int embed_dim, int label, T weight, T* d_w, T* d_b,
                T* d_e);

// Cosines between the normalized embedding and each normalized class row.
// Throws NumericalError on a zero-norm embedding or class row.
template <typename T>
std::vector<T> arcface_cosines(const T* w, int n_classes, const T* e, int embed_dim);

// -log( e^{s cos(theta_y + m)} / (e^{s cos(theta_y + m)} + sum_{j != y} e^{s cos theta_j}) ).
template <typename T>
T arcface_head_loss(const T* w, int n_classes, const T* e, int embed_dim, int label, double scale,
                    double margin, T weight, T* d_w, T* d_e);

// Logits (z0, z1) of the BCE head.
template <typename T>
std::pair<T, T> bce_logits(const ScorerModelT<T>& model, std::span<const T> embedding);

// ---- optimizer ----

template <typename T>
struct AdamStateT {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;
};
using AdamState = AdamStateT<float>;

// Bias-corrected Adam in the step-size form:
//   lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t);  p -= lr_t * m / (sqrt(v) + eps)
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamStateT<T>& state,
               const TrainConfig& cfg);

// ---- gradient check ----

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_block;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

// Compares compute_loss gradients with a five-point central difference for
// every parameter. Relative error |a - n| / max(|a|, |n|), switching to the
// absolute difference when both magnitudes are below 1e-8.
GradCheckReport grad_check(const ScorerModelT<double>& model, std::span<const Example> batch,
                           double tolerance, double step = 3e-4);

// ---- training ----

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_uar = 0.0;
  double dev_recall_real = 0.0;
  double dev_recall_synthetic = 0.0;
};

struct TrainResult {
  ScorerModel model;  // parameters from the best dev epoch
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_dev_uar = 0.0;
};

using FeatureProvider = std::function<FeatureMatrix(const Manifest&, const UtteranceEntry&)>;

// Provider that decodes the audio and computes log-mel features.
FeatureProvider log_mel_provider(const DspConfig& dsp);

// Per-class prediction from an embedding batch: BCE predicts real iff
// softmax(z)_1 > 0.5; Arcface picks the class with the largest cosine.
std::vector<int> predict_labels(const ScorerModel& model, std::span<const float> embeddings,
                                std::size_t batch);

// Mini-batch training with per-epoch shuffling, length-bucketed batches and
// early stopping on dev unweighted average recall. Deterministic given the
// seed. `log` receives one line per epoch when set.
TrainResult train_scorer(const Manifest& train, const Manifest& dev, const NetConfig& net,
                         const ArcfaceConfig& arc, const TrainConfig& cfg, const FeatureProvider& features,
                         const std::function<void(const EpochStats&)>& log = {});

// Estimates InputNorm from all frames of the given feature matrices.
InputNorm estimate_input_norm(std::span<const FeatureMatrix> features, int dim);

// ---- checkpoint ----

// Binary checkpoint: "TTSM" magic, u32 version, u32 input_dim, u32 hidden,
// u32 embed_dim, u32 head, u32 n_classes, f32 scale, f32 margin,
// u64 parameter count, input_dim f32 norm means, input_dim f32 norm inverse
// std-devs, then the parameters in ParamLayout order, all little-endian.
void save_checkpoint(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ttsel
