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

#include "ttsel/common.hpp"
#include "ttsel/kernels.hpp"
#include "ttsel/net.hpp"

namespace ttsel {

namespace {

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// Time-major padded batch: x[(t * B + b) * dim + d].
template <typename T>
struct PackedBatch {
  int steps = 0;
  int batch = 0;
  int dim = 0;
  std::vector<int> lengths;
  std::vector<T> x;
};

template <typename T>
PackedBatch<T> pack(const ScorerModelT<T>& model, std::span<const FeatureMatrix* const> feats) {
  PackedBatch<T> p;
  p.batch = static_cast<int>(feats.size());
  p.dim = model.net.input_dim;
  for (const FeatureMatrix* f : feats) {
    if (f->kind != FeatureKind::kLogMel) throw Error("scorer input must be log-mel features");
    if (static_cast<int>(f->dims) != p.dim) {
      throw Error("feature dimension mismatch: got " + std::to_string(f->dims) + ", model expects " +
                  std::to_string(p.dim));
    }
    if (f->frames == 0) throw Error("scorer input has zero frames");
    p.lengths.push_back(static_cast<int>(f->frames));
    p.steps = std::max(p.steps, static_cast<int>(f->frames));
  }
  p.x.assign(static_cast<std::size_t>(p.steps) * p.batch * p.dim, T(0));
  const auto& mean = model.norm.mean;
  const auto& inv = model.norm.inv_std;
  for (int b = 0; b < p.batch; ++b) {
    const FeatureMatrix& f = *feats[b];
    for (int t = 0; t < p.lengths[b]; ++t) {
      T* dst = p.x.data() + (static_cast<std::size_t>(t) * p.batch + b) * p.dim;
      const float* src = f.data.data() + static_cast<std::size_t>(t) * p.dim;
      for (int d = 0; d < p.dim; ++d) {
        dst[d] = (static_cast<T>(src[d]) - static_cast<T>(mean[d])) * static_cast<T>(inv[d]);
      }
    }
  }
  return p;
}

struct LayerWeights {
  int in_dim;
  int hidden;
};

template <typename T>
struct LayerTrace {
  std::vector<T> gates;  // steps*B x 3H, activated [r | z | n]
  std::vector<T> hn;     // steps*B x H, recurrent candidate term (kept only when training)
  std::vector<T> h;      // (steps+1)*B x H, h[0] = 0
};

template <typename T>
void layer_forward(const ScorerModelT<T>& m, int layer, int in_dim, const T* x, int steps, int batch,
                   const std::vector<int>& lengths, bool keep_trace, LayerTrace<T>& tr) {
  const int H = m.net.hidden;
  const int G = 3 * H;
  const T* wx = m.data(m.layout.gru_wx[layer]);
  const T* wh = m.data(m.layout.gru_wh[layer]);
  const T* bx = m.data(m.layout.gru_bx[layer]);
  const T* bh = m.data(m.layout.gru_bh[layer]);
  const std::size_t rows = static_cast<std::size_t>(steps) * batch;

  tr.gates.resize(rows * G);
  for (std::size_t r = 0; r < rows; ++r) std::copy(bx, bx + G, tr.gates.data() + r * G);
  kernels::gemm_acc(static_cast<int>(rows), G, in_dim, x, in_dim, wx, G, tr.gates.data(), G);

  tr.h.assign((rows + batch) * H, T(0));
  if (keep_trace) tr.hn.assign(rows * H, T(0));
  std::vector<T> gh(static_cast<std::size_t>(batch) * G);
  for (int t = 0; t < steps; ++t) {
    const T* hprev = tr.h.data() + static_cast<std::size_t>(t) * batch * H;
    T* hcur = tr.h.data() + static_cast<std::size_t>(t + 1) * batch * H;
    for (int b = 0; b < batch; ++b) std::copy(bh, bh + G, gh.data() + static_cast<std::size_t>(b) * G);
    kernels::gemm_acc(batch, G, H, hprev, H, wh, G, gh.data(), G);
    for (int b = 0; b < batch; ++b) {
      const T* hp = hprev + static_cast<std::size_t>(b) * H;
      T* hc = hcur + static_cast<std::size_t>(b) * H;
      if (t >= lengths[b]) {
        std::copy(hp, hp + H, hc);
        continue;
      }
      T* g = tr.gates.data() + (static_cast<std::size_t>(t) * batch + b) * G;
      const T* ghb = gh.data() + static_cast<std::size_t>(b) * G;
      T* hn = keep_trace ? tr.hn.data() + (static_cast<std::size_t>(t) * batch + b) * H : nullptr;
      for (int j = 0; j < H; ++j) {
        const T r = sigmoid(g[j] + ghb[j]);
        const T z = sigmoid(g[H + j] + ghb[H + j]);
        const T cand = ghb[2 * H + j];
        const T n = std::tanh(g[2 * H + j] + r * cand);
        g[j] = r;
        g[H + j] = z;
        g[2 * H + j] = n;
        if (hn) hn[j] = cand;
        hc[j] = (T(1) - z) * n + z * hp[j];
      }
    }
  }
}

template <typename T>
struct LayerGrads {
  T* wx;
  T* wh;
  T* bx;
  T* bh;
};

// Backprop through one layer. dh_seq (steps*B x H, optional) is the gradient
// arriving at each step's output; dh_final (B x H) at the final state. When
// dx is non-null it receives the gradient w.r.t. the layer input.
template <typename T>
void layer_backward(const ScorerModelT<T>& m, int layer, int in_dim, const T* x, int steps, int batch,
                    const std::vector<int>& lengths, const LayerTrace<T>& tr, const T* dh_seq,
                    const T* dh_final, LayerGrads<T> grads, std::vector<T>* dx) {
  const int H = m.net.hidden;
  const int G = 3 * H;
  const T* wx = m.data(m.layout.gru_wx[layer]);
  const T* wh = m.data(m.layout.gru_wh[layer]);
  const std::size_t rows = static_cast<std::size_t>(steps) * batch;

  // wh^T (3H x H) so dh_prev += dGh * wh^T is a plain row-major product.
  std::vector<T> wh_t(static_cast<std::size_t>(G) * H);
  kernels::transpose(H, G, wh, G, wh_t.data(), H);

  std::vector<T> dgx(rows * G, T(0));
  std::vector<T> dgh(static_cast<std::size_t>(batch) * G);
  std::vector<T> dh(dh_final, dh_final + static_cast<std::size_t>(batch) * H);
  std::vector<T> dh_next(static_cast<std::size_t>(batch) * H);
  std::vector<T> hprev_t(static_cast<std::size_t>(H) * batch);

  for (int t = steps - 1; t >= 0; --t) {
    if (dh_seq) {
      const T* src = dh_seq + static_cast<std::size_t>(t) * batch * H;
      for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += src[i];
    }
    const T* hprev = tr.h.data() + static_cast<std::size_t>(t) * batch * H;
    std::fill(dgh.begin(), dgh.end(), T(0));
    for (int b = 0; b < batch; ++b) {
      T* dhb = dh.data() + static_cast<std::size_t>(b) * H;
      T* dnext = dh_next.data() + static_cast<std::size_t>(b) * H;
      if (t >= lengths[b]) {
        // Padded step: state was carried through unchanged.
        std::copy(dhb, dhb + H, dnext);
        continue;
      }
      const std::size_t row = static_cast<std::size_t>(t) * batch + b;
      const T* g = tr.gates.data() + row * G;
      const T* hn = tr.hn.data() + row * H;
      const T* hp = hprev + static_cast<std::size_t>(b) * H;
      T* dgxr = dgx.data() + row * G;
      T* dghr = dgh.data() + static_cast<std::size_t>(b) * G;
      for (int j = 0; j < H; ++j) {
        const T r = g[j], z = g[H + j], n = g[2 * H + j];
        const T d = dhb[j];
        const T dn = d * (T(1) - z);
        const T dz = d * (hp[j] - n);
        const T da_n = dn * (T(1) - n * n);
        const T dr = da_n * hn[j];
        const T da_r = dr * r * (T(1) - r);
        const T da_z = dz * z * (T(1) - z);
        dgxr[j] = da_r;
        dgxr[H + j] = da_z;
        dgxr[2 * H + j] = da_n;
        dghr[j] = da_r;
        dghr[H + j] = da_z;
        dghr[2 * H + j] = da_n * r;
        dnext[j] = d * z;
      }
    }
    // wh gradient: hprev^T (H x B) * dGh (B x 3H).
    kernels::transpose(batch, H, hprev, H, hprev_t.data(), batch);
    kernels::gemm_acc(H, G, batch, hprev_t.data(), batch, dgh.data(), G, grads.wh, G);
    for (int b = 0; b < batch; ++b) {
      const T* dghr = dgh.data() + static_cast<std::size_t>(b) * G;
      for (int j = 0; j < G; ++j) grads.bh[j] += dghr[j];
    }
    kernels::gemm_acc(batch, H, G, dgh.data(), G, wh_t.data(), H, dh_next.data(), H);
    std::swap(dh, dh_next);
  }

  // Input-side weights: x^T (in x rows) * dGx (rows x 3H).
  std::vector<T> x_t(static_cast<std::size_t>(in_dim) * rows);
  kernels::transpose(static_cast<int>(rows), in_dim, x, in_dim, x_t.data(), static_cast<int>(rows));
  kernels::gemm_acc(in_dim, G, static_cast<int>(rows), x_t.data(), static_cast<int>(rows), dgx.data(), G,
                    grads.wx, G);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* d = dgx.data() + r * G;
    for (int j = 0; j < G; ++j) grads.bx[j] += d[j];
  }
  if (dx) {
    std::vector<T> wx_t(static_cast<std::size_t>(G) * in_dim);
    kernels::transpose(in_dim, G, wx, G, wx_t.data(), in_dim);
    dx->assign(rows * in_dim, T(0));
    kernels::gemm_acc(static_cast<int>(rows), in_dim, G, dgx.data(), G, wx_t.data(), in_dim, dx->data(),
                      in_dim);
  }
}

template <typename T>
struct ForwardState {
  PackedBatch<T> input;
  LayerTrace<T> l1, l2;
  std::vector<T> embed;  // B x E (after tanh)
};

template <typename T>
void forward(const ScorerModelT<T>& m, std::span<const FeatureMatrix* const> feats, bool keep_trace,
             ForwardState<T>& st) {
  if (feats.empty()) throw Error("empty batch");
  if (static_cast<int>(m.norm.mean.size()) != m.net.input_dim ||
      static_cast<int>(m.norm.inv_std.size()) != m.net.input_dim) {
    throw Error("model input normalization has the wrong dimension");
  }
  st.input = pack(m, feats);
  const int B = st.input.batch;
  const int steps = st.input.steps;
  const int H = m.net.hidden;
  const int E = m.net.embed_dim;
  layer_forward(m, 0, m.net.input_dim, st.input.x.data(), steps, B, st.input.lengths, keep_trace, st.l1);
  layer_forward(m, 1, H, st.l1.h.data() + static_cast<std::size_t>(B) * H, steps, B, st.input.lengths,
                keep_trace, st.l2);
  if (!keep_trace) {
    // Layer-1 activations are no longer needed.
    std::vector<T>().swap(st.l1.gates);
  }
  const T* hfinal = st.l2.h.data() + static_cast<std::size_t>(steps) * B * H;
  const T* fw = m.data(m.layout.fc_w);
  const T* fb = m.data(m.layout.fc_b);
  st.embed.assign(static_cast<std::size_t>(B) * E, T(0));
  for (int b = 0; b < B; ++b) {
    const T* h = hfinal + static_cast<std::size_t>(b) * H;
    for (int k = 0; k < E; ++k) {
      const T* w = fw + static_cast<std::size_t>(k) * H;
      T acc = fb[k];
      for (int j = 0; j < H; ++j) acc += w[j] * h[j];
      st.embed[static_cast<std::size_t>(b) * E + k] = std::tanh(acc);
    }
  }
}

}  // namespace

template <typename T>
std::vector<T> embed_batch(const ScorerModelT<T>& model, std::span<const FeatureMatrix* const> batch) {
  ForwardState<T> st;
  forward(model, batch, false, st);
  return std::move(st.embed);
}

template <typename T>
std::vector<T> forward_embedding(const ScorerModelT<T>& model, const FeatureMatrix& features) {
  const FeatureMatrix* one[] = {&features};
  return embed_batch(model, std::span<const FeatureMatrix* const>(one, 1));
}

template <typename T>
std::pair<T, T> bce_logits(const ScorerModelT<T>& model, std::span<const T> embedding) {
  if (model.net.head != HeadType::kBce) throw Error("bce_logits: model has an arcface head");
  const int E = model.net.embed_dim;
  const T* w = model.data(model.layout.head_w);
  const T* b = model.data(model.layout.head_b);
  T z0 = b[0], z1 = b[1];
  for (int k = 0; k < E; ++k) {
    z0 += w[k] * embedding[k];
    z1 += w[E + k] * embedding[k];
  }
  return {z0, z1};
}

template <typename T>
T compute_loss(const ScorerModelT<T>& m, std::span<const Example> batch, std::vector<T>* grad) {
  if (batch.empty()) throw Error("compute_loss: empty batch");
  std::vector<const FeatureMatrix*> feats;
  feats.reserve(batch.size());
  for (const auto& ex : batch) {
    if (ex.label != 0 && ex.label != 1) throw Error("compute_loss: label must be 0 or 1");
    if (!ex.features) throw Error("compute_loss: example without features");
    feats.push_back(ex.features);
  }
  const bool want_grad = grad != nullptr;
  ForwardState<T> st;
  forward(m, std::span<const FeatureMatrix* const>(feats), want_grad, st);

  const int B = st.input.batch;
  const int E = m.net.embed_dim;
  const int H = m.net.hidden;
  const int steps = st.input.steps;
  const T weight = T(1) / static_cast<T>(B);

  if (want_grad) grad->assign(m.params.size(), T(0));
  T* g = want_grad ? grad->data() : nullptr;
  std::vector<T> de(static_cast<std::size_t>(B) * E, T(0));
  T loss = 0;
  for (int b = 0; b < B; ++b) {
    const T* e = st.embed.data() + static_cast<std::size_t>(b) * E;
    T* deb = want_grad ? de.data() + static_cast<std::size_t>(b) * E : nullptr;
    if (m.net.head == HeadType::kBce) {
      loss += bce_head_loss(m.data(m.layout.head_w), m.data(m.layout.head_b), e, E, batch[b].label, weight,
                            g ? g + m.layout.head_w.offset : nullptr, g ? g + m.layout.head_b.offset : nullptr,
                            deb);
    } else {
      loss += arcface_head_loss(m.data(m.layout.head_w), m.arcface.n_classes, e, E, batch[b].label,
                                m.arcface.scale, m.arcface.margin, weight,
                                g ? g + m.layout.head_w.offset : nullptr, deb);
    }
  }
  loss *= weight;
  if (!want_grad) return loss;

  // fc backward.
  const T* hfinal = st.l2.h.data() + static_cast<std::size_t>(steps) * B * H;
  const T* fw = m.data(m.layout.fc_w);
  T* gfw = g + m.layout.fc_w.offset;
  T* gfb = g + m.layout.fc_b.offset;
  std::vector<T> dh2(static_cast<std::size_t>(B) * H, T(0));
  for (int b = 0; b < B; ++b) {
    const T* h = hfinal + static_cast<std::size_t>(b) * H;
    T* dh = dh2.data() + static_cast<std::size_t>(b) * H;
    for (int k = 0; k < E; ++k) {
      const T e = st.embed[static_cast<std::size_t>(b) * E + k];
      const T dpre = de[static_cast<std::size_t>(b) * E + k] * (T(1) - e * e);
      gfb[k] += dpre;
      T* gw = gfw + static_cast<std::size_t>(k) * H;
      const T* w = fw + static_cast<std::size_t>(k) * H;
      for (int j = 0; j < H; ++j) {
        gw[j] += dpre * h[j];
        dh[j] += dpre * w[j];
      }
    }
  }

  auto layer_grads = [&](int layer) {
    return LayerGrads<T>{g + m.layout.gru_wx[layer].offset, g + m.layout.gru_wh[layer].offset,
                         g + m.layout.gru_bx[layer].offset, g + m.layout.gru_bh[layer].offset};
  };
  std::vector<T> dh1_seq;
  const T* l2_input = st.l1.h.data() + static_cast<std::size_t>(B) * H;
  layer_backward(m, 1, H, l2_input, steps, B, st.input.lengths, st.l2, static_cast<const T*>(nullptr),
                 dh2.data(), layer_grads(1), &dh1_seq);
  const std::vector<T> zero(static_cast<std::size_t>(B) * H, T(0));
  layer_backward(m, 0, m.net.input_dim, st.input.x.data(), steps, B, st.input.lengths, st.l1,
                 dh1_seq.data(), zero.data(), layer_grads(0), static_cast<std::vector<T>*>(nullptr));
  return loss;
}

template std::vector<float> embed_batch(const ScorerModelT<float>&, std::span<const FeatureMatrix* const>);
template std::vector<double> embed_batch(const ScorerModelT<double>&, std::span<const FeatureMatrix* const>);
template std::vector<float> forward_embedding(const ScorerModelT<float>&, const FeatureMatrix&);
template std::vector<double> forward_embedding(const ScorerModelT<double>&, const FeatureMatrix&);
template std::pair<float, float> bce_logits(const ScorerModelT<float>&, std::span<const float>);
template std::pair<double, double> bce_logits(const ScorerModelT<double>&, std::span<const double>);
template float compute_loss(const ScorerModelT<float>&, std::span<const Example>, std::vector<float>*);
template double compute_loss(const ScorerModelT<double>&, std::span<const Example>, std::vector<double>*);

}  // namespace ttsel
