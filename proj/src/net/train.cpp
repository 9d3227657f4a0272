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
#include <memory>
#include <mutex>
#include <numeric>

#include "ttsel/common.hpp"
#include "ttsel/net.hpp"

namespace ttsel {

namespace {

// Batches are formed from pools of this many batches, sorted by length, so
// padding stays small while composition still changes every epoch.
constexpr int kBucketBatches = 4;

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<FeatureMatrix>& feats, int batch_size,
                                                   Rng& rng) {
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t pool = bs * kBucketBatches;
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += pool) {
    const auto end = std::min(order.size(), start + pool);
    std::stable_sort(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end),
                     [&](std::size_t a, std::size_t b) { return feats[a].frames < feats[b].frames; });
    for (std::size_t i = start; i < end; i += bs) {
      batches.emplace_back(order.begin() + static_cast<long>(i),
                           order.begin() + static_cast<long>(std::min(end, i + bs)));
    }
  }
  std::vector<std::size_t> perm(batches.size());
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(batches.size());
  for (auto p : perm) out.push_back(std::move(batches[p]));
  return out;
}

std::vector<FeatureMatrix> load_all(const Manifest& m, const FeatureProvider& features, int dim) {
  std::vector<FeatureMatrix> out;
  out.reserve(m.size());
  for (const auto& e : m) {
    out.push_back(features(m, e));
    const auto& f = out.back();
    if (f.kind != FeatureKind::kLogMel || static_cast<int>(f.dims) != dim) {
      throw Error("features for \"" + e.id + "\" are not " + std::to_string(dim) + "-dim log-mel");
    }
    if (f.frames == 0) throw Error("features for \"" + e.id + "\" have zero frames");
  }
  return out;
}

void require_both_labels(const Manifest& m, const char* which) {
  if (m.count(Label::kReal) == 0 || m.count(Label::kSynthetic) == 0) {
    throw Error(std::string(which) + " manifest must contain both real and synthetic utterances (got " +
                std::to_string(m.count(Label::kReal)) + " real, " +
                std::to_string(m.count(Label::kSynthetic)) + " synthetic)");
  }
}

struct Recall {
  double real = 0.0;
  double synthetic = 0.0;
  double uar() const { return 0.5 * (real + synthetic); }
};

Recall evaluate(const ScorerModel& model, const std::vector<FeatureMatrix>& feats, const Manifest& m,
                int batch_size) {
  std::size_t hit[2] = {0, 0}, total[2] = {0, 0};
  for (std::size_t start = 0; start < feats.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(feats.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const FeatureMatrix*> ptrs;
    for (auto i = start; i < end; ++i) ptrs.push_back(&feats[i]);
    const auto emb = embed_batch(model, std::span<const FeatureMatrix* const>(ptrs));
    const auto pred = predict_labels(model, emb, ptrs.size());
    for (auto i = start; i < end; ++i) {
      const int truth = static_cast<int>(m[i].label);
      ++total[truth];
      hit[truth] += pred[i - start] == truth;
    }
  }
  Recall r;
  r.real = total[1] ? static_cast<double>(hit[1]) / static_cast<double>(total[1]) : 0.0;
  r.synthetic = total[0] ? static_cast<double>(hit[0]) / static_cast<double>(total[0]) : 0.0;
  return r;
}

}  // namespace

InputNorm estimate_input_norm(std::span<const FeatureMatrix> features, int dim) {
  std::vector<double> sum(static_cast<std::size_t>(dim), 0.0), sq(static_cast<std::size_t>(dim), 0.0);
  double n = 0.0;
  for (const auto& f : features) {
    for (std::size_t t = 0; t < f.frames; ++t) {
      for (int d = 0; d < dim; ++d) {
        const double v = f.at(t, static_cast<std::size_t>(d));
        sum[d] += v;
        sq[d] += v * v;
      }
    }
    n += static_cast<double>(f.frames);
  }
  InputNorm norm = InputNorm::identity(dim);
  if (n == 0.0) return norm;
  for (int d = 0; d < dim; ++d) {
    const double mean = sum[d] / n;
    const double var = std::max(0.0, sq[d] / n - mean * mean);
    norm.mean[d] = static_cast<float>(mean);
    norm.inv_std[d] = static_cast<float>(var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0);
  }
  return norm;
}

FeatureProvider log_mel_provider(const DspConfig& dsp) {
  struct Cache {
    std::mutex mu;
    std::shared_ptr<FeatureExtractor> extractor;
  };
  auto cache = std::make_shared<Cache>();
  return [dsp, cache](const Manifest& m, const UtteranceEntry& e) {
    const AudioBuffer audio = read_audio(m.resolve_audio(e));
    std::shared_ptr<FeatureExtractor> ex;
    {
      std::lock_guard lock(cache->mu);
      if (!cache->extractor || cache->extractor->sample_rate() != audio.sample_rate) {
        cache->extractor = std::make_shared<FeatureExtractor>(dsp, audio.sample_rate);
      }
      ex = cache->extractor;
    }
    return ex->log_mel(audio);
  };
}

std::vector<int> predict_labels(const ScorerModel& model, std::span<const float> embeddings, std::size_t batch) {
  const auto E = static_cast<std::size_t>(model.net.embed_dim);
  if (embeddings.size() != batch * E) throw Error("predict_labels: embedding buffer size mismatch");
  std::vector<int> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto e = embeddings.subspan(b * E, E);
    if (model.net.head == HeadType::kBce) {
      const auto [z0, z1] = bce_logits(model, e);
      const double score = 1.0 / (1.0 + std::exp(static_cast<double>(z0) - static_cast<double>(z1)));
      out[b] = score > 0.5 ? 1 : 0;
    } else {
      const auto cos = arcface_cosines(model.data(model.layout.head_w), model.arcface.n_classes, e.data(),
                                       model.net.embed_dim);
      out[b] = static_cast<int>(std::max_element(cos.begin(), cos.end()) - cos.begin());
    }
  }
  return out;
}

TrainResult train_scorer(const Manifest& train, const Manifest& dev, const NetConfig& net,
                         const ArcfaceConfig& arc, const TrainConfig& cfg, const FeatureProvider& features,
                         const std::function<void(const EpochStats&)>& log) {
  net.validate();
  if (net.head == HeadType::kArcface) arc.validate();
  cfg.validate();
  require_both_labels(train, "train");
  require_both_labels(dev, "dev");

  const auto train_feats = load_all(train, features, net.input_dim);
  const auto dev_feats = load_all(dev, features, net.input_dim);

  ScorerModel model = init_model(net, arc, derive_seed(cfg.seed, "model"));
  model.norm = estimate_input_norm(train_feats, net.input_dim);

  TrainResult result;
  result.model = model;
  result.best_dev_uar = -1.0;
  Rng rng(derive_seed(cfg.seed, "batches"));
  AdamState adam;
  std::vector<float> grad;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches = make_batches(train_feats, cfg.batch_size, rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<Example> ex;
      ex.reserve(batches[bi].size());
      for (auto i : batches[bi]) ex.push_back(Example{&train_feats[i], static_cast<int>(train[i].label)});
      const float loss = compute_loss(model, std::span<const Example>(ex), &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(bi) + " (first utterance \"" + train[batches[bi].front()].id +
                             "\", lr " + format_fixed(cfg.lr, 8) + ")");
      }
      adam_step(std::span<float>(model.params), std::span<const float>(grad), adam, cfg);
      loss_sum += static_cast<double>(loss) * static_cast<double>(ex.size());
      seen += ex.size();
    }
    const Recall rec = evaluate(model, dev_feats, dev, cfg.batch_size);
    EpochStats st{epoch, loss_sum / static_cast<double>(seen), rec.uar(), rec.real, rec.synthetic};
    result.history.push_back(st);
    if (log) log(st);
    if (st.dev_uar > result.best_dev_uar) {
      result.best_dev_uar = st.dev_uar;
      result.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  return result;
}

}  // namespace ttsel
