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

#include <cmath>

#include "ttsel/common.hpp"
#include "ttsel/net.hpp"

namespace ttsel {

std::string_view head_name(HeadType h) { return h == HeadType::kBce ? "bce" : "arcface"; }

HeadType parse_head(std::string_view s) {
  if (s == "bce") return HeadType::kBce;
  if (s == "arcface") return HeadType::kArcface;
  throw Error("unknown head \"" + std::string(s) + "\" (expected bce|arcface)");
}

void NetConfig::validate() const {
  if (input_dim < 1) throw Error("net.input_dim: must be >= 1");
  if (hidden < 1) throw Error("net.hidden: must be >= 1");
  if (embed_dim < 1) throw Error("net.embed_dim: must be >= 1");
}

void ArcfaceConfig::validate() const {
  if (!(scale > 0.0)) throw Error("arcface.scale: must be > 0");
  if (!(margin >= 0.0 && margin < M_PI / 2.0)) throw Error("arcface.margin: must satisfy 0 <= m < pi/2");
  if (n_classes < 2) throw Error("arcface.n_classes: must be >= 2");
}

TrainConfig TrainConfig::defaults_for(HeadType head) {
  TrainConfig c;
  c.lr = head == HeadType::kBce ? 1e-4 : 1e-5;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw Error("train.batch_size: must be >= 1");
  if (!(lr > 0.0)) throw Error("train.lr: must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error("train.beta1: must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw Error("train.beta2: must be in [0, 1)");
  if (!(eps > 0.0)) throw Error("train.eps: must be > 0");
  if (max_epochs < 1) throw Error("train.max_epochs: must be >= 1");
  if (patience < 0) throw Error("train.patience: must be >= 0");
}

ParamLayout ParamLayout::make(const NetConfig& net, const ArcfaceConfig& arc) {
  net.validate();
  ParamLayout l;
  std::size_t off = 0;
  auto take = [&off](std::string name, std::size_t rows, std::size_t cols) {
    ParamBlock b{std::move(name), off, rows, cols};
    off += rows * cols;
    return b;
  };
  const auto h = static_cast<std::size_t>(net.hidden);
  const auto e = static_cast<std::size_t>(net.embed_dim);
  for (int layer = 0; layer < 2; ++layer) {
    const std::string p = "gru" + std::to_string(layer + 1);
    const auto in = layer == 0 ? static_cast<std::size_t>(net.input_dim) : h;
    l.gru_wx[layer] = take(p + ".wx", in, 3 * h);
    l.gru_wh[layer] = take(p + ".wh", h, 3 * h);
    l.gru_bx[layer] = take(p + ".bx", 1, 3 * h);
    l.gru_bh[layer] = take(p + ".bh", 1, 3 * h);
  }
  l.fc_w = take("fc.w", e, h);
  l.fc_b = take("fc.b", 1, e);
  if (net.head == HeadType::kBce) {
    l.head_w = take("head.w", 2, e);
    l.head_b = take("head.b", 1, 2);
  } else {
    arc.validate();
    l.head_w = take("head.w", static_cast<std::size_t>(arc.n_classes), e);
    l.head_b = ParamBlock{"head.b", off, 0, 0};
  }
  l.total = off;
  return l;
}

std::vector<const ParamBlock*> ParamLayout::blocks() const {
  std::vector<const ParamBlock*> out;
  for (int i = 0; i < 2; ++i) {
    out.push_back(&gru_wx[i]);
    out.push_back(&gru_wh[i]);
    out.push_back(&gru_bx[i]);
    out.push_back(&gru_bh[i]);
  }
  out.push_back(&fc_w);
  out.push_back(&fc_b);
  out.push_back(&head_w);
  if (head_b.size() > 0) out.push_back(&head_b);
  return out;
}

const ParamBlock& ParamLayout::block_of(std::size_t i) const {
  for (const ParamBlock* b : blocks()) {
    if (i >= b->offset && i < b->offset + b->size()) return *b;
  }
  throw Error("parameter index out of range: " + std::to_string(i));
}

InputNorm InputNorm::identity(int dim) {
  return InputNorm{std::vector<float>(static_cast<std::size_t>(dim), 0.0f),
                   std::vector<float>(static_cast<std::size_t>(dim), 1.0f)};
}

ScorerModel init_model(const NetConfig& net, const ArcfaceConfig& arc, std::uint64_t seed) {
  ScorerModel m;
  m.net = net;
  m.arcface = arc;
  m.layout = ParamLayout::make(net, arc);
  m.norm = InputNorm::identity(net.input_dim);
  m.params.assign(m.layout.total, 0.0f);
  Rng rng(derive_seed(seed, "init"));
  auto fill_uniform = [&](const ParamBlock& b, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    float* p = m.data(b);
    for (std::size_t i = 0; i < b.size(); ++i) p[i] = static_cast<float>(rng.uniform(-bound, bound));
  };
  for (int i = 0; i < 2; ++i) {
    fill_uniform(m.layout.gru_wx[i], static_cast<double>(m.layout.gru_wx[i].rows));
    fill_uniform(m.layout.gru_wh[i], static_cast<double>(net.hidden));
  }
  fill_uniform(m.layout.fc_w, static_cast<double>(net.hidden));
  if (net.head == HeadType::kBce) {
    fill_uniform(m.layout.head_w, static_cast<double>(net.embed_dim));
  } else {
    // Uniform on the unit sphere: normalized Gaussian rows.
    float* w = m.data(m.layout.head_w);
    const auto e = static_cast<std::size_t>(net.embed_dim);
    for (std::size_t r = 0; r < m.layout.head_w.rows; ++r) {
      std::vector<double> g(e);
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& x : g) {
          x = rng.normal();
          norm += x * x;
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < e; ++c) w[r * e + c] = static_cast<float>(g[c] / norm);
    }
  }
  return m;
}

ScorerModelT<double> to_double(const ScorerModel& m) {
  ScorerModelT<double> d;
  d.net = m.net;
  d.arcface = m.arcface;
  d.layout = m.layout;
  d.norm = m.norm;
  d.params.assign(m.params.begin(), m.params.end());
  return d;
}

}  // namespace ttsel
