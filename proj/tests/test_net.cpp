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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <numbers>

#include "test_support.hpp"
#include "ttsel/net.hpp"

using namespace ttsel;
using ttsel::test::TempDir;

namespace {

FeatureMatrix random_features(Rng& rng, std::size_t t, std::size_t d) {
  FeatureMatrix f(t, d, FeatureKind::kLogMel, 10.0);
  for (auto& v : f.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  return f;
}

ScorerModelT<double> tiny_double(HeadType head, std::uint64_t seed, int in = 8, int hidden = 8, int embed = 4,
                                 double margin = 0.5) {
  NetConfig net{in, hidden, embed, head};
  ArcfaceConfig arc;
  arc.margin = margin;
  auto m = to_double(init_model(net, arc, seed));
  // Non-trivial input normalization so its use is covered too.
  Rng rng(seed + 99);
  for (int d = 0; d < in; ++d) {
    m.norm.mean[d] = static_cast<float>(rng.uniform(-0.5, 0.5));
    m.norm.inv_std[d] = static_cast<float>(rng.uniform(0.5, 1.5));
  }
  for (auto* b : {&m.layout.gru_bx[0], &m.layout.gru_bh[0], &m.layout.gru_bx[1], &m.layout.gru_bh[1], &m.layout.fc_b}) {
    for (std::size_t i = 0; i < b->size(); ++i) m.params[b->offset + i] = rng.uniform(-0.3, 0.3);
  }
  if (head == HeadType::kBce) {
    for (std::size_t i = 0; i < m.layout.head_b.size(); ++i) m.params[m.layout.head_b.offset + i] = rng.uniform(-0.3, 0.3);
  }
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Loop-based GRU + fc reference: r, z, n gates with the reset gate applied to
// the recurrent candidate term (h' = (1 - z) n + z h).
std::vector<double> oracle_embedding(const ScorerModelT<double>& m, const FeatureMatrix& f) {
  const int H = m.net.hidden;
  std::vector<double> input(f.frames * f.dims);
  for (std::size_t t = 0; t < f.frames; ++t) {
    for (std::size_t d = 0; d < f.dims; ++d) {
      input[t * f.dims + d] = (static_cast<double>(f.at(t, d)) - m.norm.mean[d]) * static_cast<double>(m.norm.inv_std[d]);
    }
  }
  int in_dim = static_cast<int>(f.dims);
  for (int layer = 0; layer < 2; ++layer) {
    const double* wx = m.data(m.layout.gru_wx[layer]);
    const double* wh = m.data(m.layout.gru_wh[layer]);
    const double* bx = m.data(m.layout.gru_bx[layer]);
    const double* bh = m.data(m.layout.gru_bh[layer]);
    std::vector<double> h(H, 0.0), out(f.frames * H);
    for (std::size_t t = 0; t < f.frames; ++t) {
      const double* x = &input[t * in_dim];
      std::vector<double> hn(H);
      for (int j = 0; j < H; ++j) {
        double ar = bx[j] + bh[j], az = bx[H + j] + bh[H + j], xn = bx[2 * H + j], hh = bh[2 * H + j];
        for (int i = 0; i < in_dim; ++i) {
          ar += x[i] * wx[i * 3 * H + j];
          az += x[i] * wx[i * 3 * H + H + j];
          xn += x[i] * wx[i * 3 * H + 2 * H + j];
        }
        for (int i = 0; i < H; ++i) {
          ar += h[i] * wh[i * 3 * H + j];
          az += h[i] * wh[i * 3 * H + H + j];
          hh += h[i] * wh[i * 3 * H + 2 * H + j];
        }
        const double r = sigmoid(ar), z = sigmoid(az);
        const double n = std::tanh(xn + r * hh);
        hn[j] = (1.0 - z) * n + z * h[j];
      }
      h = hn;
      std::copy(h.begin(), h.end(), out.begin() + static_cast<long>(t * H));
    }
    input = out;
    in_dim = H;
  }
  const int E = m.net.embed_dim;
  const double* h = &input[(f.frames - 1) * H];
  std::vector<double> e(E);
  for (int k = 0; k < E; ++k) {
    double acc = m.data(m.layout.fc_b)[k];
    for (int j = 0; j < H; ++j) acc += m.data(m.layout.fc_w)[k * H + j] * h[j];
    e[k] = std::tanh(acc);
  }
  return e;
}

double scaled_softmax_xent(const std::vector<double>& cosines, int label, double s) {
  double mx = -1e300;
  for (double c : cosines) mx = std::max(mx, s * c);
  double sum = 0.0;
  for (double c : cosines) sum += std::exp(s * c - mx);
  return -(s * cosines[label] - mx - std::log(sum));
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("config validation") {
  ArcfaceConfig arc;
  arc.margin = 2.0;
  CHECK_THROWS_WITH_AS(arc.validate(), doctest::Contains("arcface.margin"), Error);
  arc.margin = 0.0;
  CHECK_NOTHROW(arc.validate());
  NetConfig net;
  net.hidden = 0;
  CHECK_THROWS_WITH_AS(net.validate(), doctest::Contains("net.hidden"), Error);
  TrainConfig t;
  t.lr = 0.0;
  CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("train.lr"), Error);
  CHECK(TrainConfig::defaults_for(HeadType::kBce).lr == 1e-4);
  CHECK(TrainConfig::defaults_for(HeadType::kArcface).lr == 1e-5);
  CHECK(NetConfig{}.hidden == 256);
  CHECK(NetConfig{}.embed_dim == 64);
  CHECK(TrainConfig{}.batch_size == 64);
  CHECK(ArcfaceConfig{}.scale == 10.0);
  CHECK(ArcfaceConfig{}.margin == 0.5);
}

TEST_CASE("parameter layout and initialization") {
  NetConfig net{80, 16, 8, HeadType::kArcface};
  const auto m = init_model(net, ArcfaceConfig{}, 4);
  const auto& L = m.layout;
  CHECK(L.gru_wx[0].rows == 80);
  CHECK(L.gru_wx[0].cols == 48);
  CHECK(L.gru_wh[1].rows == 16);
  CHECK(L.fc_w.rows == 8);
  CHECK(L.head_w.rows == 2);
  CHECK(L.head_b.size() == 0);
  std::size_t total = 0;
  for (const auto* b : L.blocks()) total += b->size();
  CHECK(total == L.total);
  CHECK(m.params.size() == L.total);
  for (std::size_t i = 0; i < L.gru_wx[0].size(); ++i) CHECK(std::abs(m.params[L.gru_wx[0].offset + i]) <= 1.0f / std::sqrt(16.0f));
  for (int j = 0; j < 2; ++j) {
    double n = 0;
    for (int k = 0; k < 8; ++k) n += std::pow(m.params[L.head_w.offset + j * 8 + k], 2);
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(init_model(net, ArcfaceConfig{}, 4).params == m.params);
  CHECK(init_model(net, ArcfaceConfig{}, 5).params != m.params);
}

TEST_CASE("zero weights give a zero embedding") {
  auto m = tiny_double(HeadType::kBce, 1);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  Rng rng(2);
  const auto f = random_features(rng, 6, 8);
  for (double v : forward_embedding(m, f)) CHECK(v == 0.0);
}

TEST_CASE("forward pass matches a loop-based recurrence") {
  Rng rng(3);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto m = tiny_double(seed % 2 ? HeadType::kBce : HeadType::kArcface, seed, 6, 4, 3);
    for (std::size_t T : {1, 5}) {
      const auto f = random_features(rng, T, 6);
      const auto got = forward_embedding(m, f);
      const auto want = oracle_embedding(m, f);
      REQUIRE(got.size() == 3);
      for (int k = 0; k < 3; ++k) {
        CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12).scale(1e-12));
        CHECK(std::abs(got[k]) < 1.0);
      }
    }
  }
}

TEST_CASE("batched embeddings are bitwise equal to single calls") {
  NetConfig net{80, 32, 16, HeadType::kBce};
  const auto m = init_model(net, ArcfaceConfig{}, 9);
  Rng rng(4);
  std::vector<FeatureMatrix> feats;
  for (std::size_t t : {3, 17, 1, 9, 17, 4}) feats.push_back(random_features(rng, t, 80));
  std::vector<const FeatureMatrix*> ptrs;
  for (const auto& f : feats) ptrs.push_back(&f);
  const auto batch = embed_batch(m, std::span<const FeatureMatrix* const>(ptrs));
  for (std::size_t b = 0; b < feats.size(); ++b) {
    const auto single = forward_embedding(m, feats[b]);
    CHECK(std::memcmp(single.data(), batch.data() + b * 16, 16 * sizeof(float)) == 0);
  }
}

TEST_CASE("input validation") {
  const auto m = init_model(NetConfig{80, 8, 4, HeadType::kBce}, ArcfaceConfig{}, 1);
  Rng rng(5);
  auto f = random_features(rng, 3, 13);
  CHECK_THROWS_WITH_AS(forward_embedding(m, f), doctest::Contains("dimension"), Error);
  auto g = random_features(rng, 3, 80);
  g.kind = FeatureKind::kMfcc;
  CHECK_THROWS_AS(forward_embedding(m, g), Error);
}

TEST_CASE("bce with equal logits costs ln 2") {
  auto m = tiny_double(HeadType::kBce, 6);
  for (std::size_t i = 0; i < m.layout.head_w.size(); ++i) m.params[m.layout.head_w.offset + i] = 0.0;
  m.params[m.layout.head_b.offset] = m.params[m.layout.head_b.offset + 1] = 0.3;
  Rng rng(6);
  const auto f1 = random_features(rng, 4, 8), f2 = random_features(rng, 7, 8);
  const Example ex[] = {{&f1, 0}, {&f2, 1}};
  CHECK(compute_loss(m, std::span<const Example>(ex), static_cast<std::vector<double>*>(nullptr)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss is a batch mean and permutation invariant") {
  const auto m = tiny_double(HeadType::kArcface, 7);
  Rng rng(7);
  std::vector<FeatureMatrix> f;
  for (int i = 0; i < 4; ++i) f.push_back(random_features(rng, 2 + i, 8));
  const Example a[] = {{&f[0], 0}, {&f[1], 1}, {&f[2], 1}, {&f[3], 0}};
  const Example b[] = {{&f[3], 0}, {&f[1], 1}, {&f[0], 0}, {&f[2], 1}};
  std::vector<double> ga, gb;
  const double la = compute_loss(m, std::span<const Example>(a), &ga);
  const double lb = compute_loss(m, std::span<const Example>(b), &gb);
  CHECK(la == doctest::Approx(lb).epsilon(1e-14));
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-12).scale(1e-14));
  double mean = 0.0;
  for (const auto& e : a) mean += compute_loss(m, std::span<const Example>(&e, 1), static_cast<std::vector<double>*>(nullptr)) / 4.0;
  CHECK(la == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("arcface with zero margin is scaled softmax cross-entropy") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(2 * 5), e(5);
    for (auto& v : w) v = rng.normal();
    for (auto& v : e) v = rng.normal();
    const int label = static_cast<int>(rng.below(2));
    const auto cos = arcface_cosines(w.data(), 2, e.data(), 5);
    const double got = arcface_head_loss<double>(w.data(), 2, e.data(), 5, label, 10.0, 0.0, 1.0, nullptr, nullptr);
    CHECK(got == doctest::Approx(scaled_softmax_xent(cos, label, 10.0)).epsilon(1e-12));
    // Positive rescaling of the embedding does not change the loss.
    std::vector<double> e2(e);
    for (auto& v : e2) v *= 2.0;
    const double with_margin = arcface_head_loss<double>(w.data(), 2, e.data(), 5, label, 10.0, 0.5, 1.0, nullptr, nullptr);
    CHECK(arcface_head_loss<double>(w.data(), 2, e2.data(), 5, label, 10.0, 0.5, 1.0, nullptr, nullptr) ==
          doctest::Approx(with_margin).epsilon(1e-9));
    // A positive margin makes the target harder.
    CHECK(with_margin > got);
  }
}

TEST_CASE("arcface cosines and degeneracy") {
  const double w[] = {1, 0, 0, 1};
  const double e[] = {3, 4};
  const auto c = arcface_cosines(w, 2, e, 2);
  CHECK(c[0] == doctest::Approx(0.6));
  CHECK(c[1] == doctest::Approx(0.8));
  const double z[] = {0, 0};
  CHECK_THROWS_AS(arcface_cosines(w, 2, z, 2), NumericalError);
  CHECK_THROWS_AS(arcface_head_loss<double>(w, 2, z, 2, 0, 10.0, 0.5, 1.0, static_cast<double*>(nullptr), static_cast<double*>(nullptr)),
                  NumericalError);
}

TEST_CASE("gradients match central differences for both heads") {
  Rng rng(9);
  for (HeadType head : {HeadType::kBce, HeadType::kArcface}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto m = tiny_double(head, seed * 31);
      std::vector<FeatureMatrix> f;
      for (int i = 0; i < 3; ++i) f.push_back(random_features(rng, 1 + rng.below(8), 8));
      const Example ex[] = {{&f[0], 0}, {&f[1], 1}, {&f[2], 1}};
      const auto rep = grad_check(m, std::span<const Example>(ex), 1e-4);
      CAPTURE(head_name(head));
      CAPTURE(rep.worst_block);
      CHECK(rep.checked == m.params.size());
      CHECK(rep.max_rel_error <= 1e-4);
      CHECK(rep.passed);
    }
  }
}

TEST_CASE("gradient check uses absolute error near zero") {
  auto m = tiny_double(HeadType::kBce, 12);
  // With zero head weights nothing upstream of the head receives gradient.
  for (std::size_t i = 0; i < m.layout.head_w.size(); ++i) m.params[m.layout.head_w.offset + i] = 0.0;
  Rng rng(12);
  const auto f = random_features(rng, 4, 8);
  const Example ex[] = {{&f, 1}};
  const auto rep = grad_check(m, std::span<const Example>(ex), 1e-4);
  CHECK(rep.passed);
  std::vector<double> g;
  compute_loss(m, std::span<const Example>(ex), &g);
  for (std::size_t i = 0; i < m.layout.fc_w.size(); ++i) CHECK(g[m.layout.fc_w.offset + i] == 0.0);
}

TEST_CASE("adam first step") {
  TrainConfig cfg;
  for (double g : {1e-3, -2.0, 0.5, 1e-9}) {
    std::vector<double> p{1.0}, grad{g};
    AdamStateT<double> st;
    adam_step(std::span<double>(p), std::span<const double>(grad), st, cfg);
    const double expect = -cfg.lr * g / (std::abs(g) + cfg.eps / std::sqrt(1.0 - cfg.beta2));
    CHECK(p[0] - 1.0 == doctest::Approx(expect).epsilon(1e-9));
    CHECK(st.step == 1);
  }
}

TEST_CASE("adam zero gradient is a fixed point") {
  TrainConfig cfg;
  std::vector<double> p{0.25, -3.0}, g{0.0, 0.0};
  AdamStateT<double> st;
  for (int i = 0; i < 10; ++i) adam_step(std::span<double>(p), std::span<const double>(g), st, cfg);
  CHECK(p[0] == 0.25);
  CHECK(p[1] == -3.0);
  CHECK(st.step == 10);
}

TEST_CASE("adam two steps match the direct formula") {
  TrainConfig cfg;
  cfg.lr = 0.01;
  std::vector<double> p{0.0};
  AdamStateT<double> st;
  double m = 0, v = 0, x = 0;
  const double gs[] = {1.0, -1.0};
  for (int t = 1; t <= 2; ++t) {
    const double g = gs[t - 1];
    std::vector<double> grad{g};
    adam_step(std::span<double>(p), std::span<const double>(grad), st, cfg);
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
    x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps / std::sqrt(1 - std::pow(cfg.beta2, t)));
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-12));
  }
  std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(adam_step(std::span<double>(p), std::span<const double>(bad), st, cfg), Error);
}

TEST_CASE("checkpoint round trip and corruption") {
  TempDir dir;
  for (HeadType head : {HeadType::kBce, HeadType::kArcface}) {
    auto m = init_model(NetConfig{80, 12, 6, head}, ArcfaceConfig{}, 3);
    m.norm.mean[5] = 1.5f;
    m.norm.inv_std[7] = 0.25f;
    save_checkpoint(m, dir / "m.ckpt");
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.net == m.net);
    CHECK(back.arcface.scale == m.arcface.scale);
    CHECK(back.norm == m.norm);
    CHECK(back.params == m.params);
  }
  const auto bytes = read_text_file((dir / "m.ckpt").string());
  write_text_file((dir / "t.ckpt").string(), bytes.substr(0, bytes.size() - 10));
  CHECK_THROWS_AS(load_checkpoint(dir / "t.ckpt"), Error);
  write_text_file((dir / "b.ckpt").string(), "XXXX" + bytes.substr(4));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "b.ckpt"), doctest::Contains("magic"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_CASE("training: early stopping, determinism and class checks") {
  // In-memory features: real utterances carry a positive offset.
  Manifest train, dev;
  Rng rng(13);
  std::map<std::string, FeatureMatrix> feats;
  auto add = [&](Manifest& m, const std::string& id, Label l) {
    m.add({id, id + ".wav", "", l});
    auto f = random_features(rng, 3 + rng.below(6), 8);
    if (l == Label::kReal) {
      for (auto& v : f.data) v += 1.5f;
    }
    feats[id] = f;
  };
  for (int i = 0; i < 24; ++i) add(train, "t" + std::to_string(i), i % 2 ? Label::kReal : Label::kSynthetic);
  for (int i = 0; i < 8; ++i) add(dev, "d" + std::to_string(i), i % 2 ? Label::kReal : Label::kSynthetic);
  const FeatureProvider provider = [&](const Manifest&, const UtteranceEntry& e) { return feats.at(e.id); };
  NetConfig net{8, 8, 4, HeadType::kBce};
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.lr = 0.01;
  cfg.max_epochs = 10;
  cfg.patience = 0;
  const auto r0 = train_scorer(train, dev, net, ArcfaceConfig{}, cfg, provider);
  CHECK(r0.history.size() == 1);

  cfg.patience = 3;
  const auto r1 = train_scorer(train, dev, net, ArcfaceConfig{}, cfg, provider);
  const auto r2 = train_scorer(train, dev, net, ArcfaceConfig{}, cfg, provider);
  CHECK(r1.model.params == r2.model.params);
  CHECK(r1.best_dev_uar >= 0.9);
  CHECK(r1.history[static_cast<std::size_t>(r1.best_epoch - 1)].dev_uar == r1.best_dev_uar);

  net.head = HeadType::kArcface;
  const auto ra = train_scorer(train, dev, net, ArcfaceConfig{}, cfg, provider);
  CHECK(ra.best_dev_uar >= 0.9);

  Manifest only_real;
  only_real.add({"x", "x.wav", "", Label::kReal});
  feats["x"] = random_features(rng, 4, 8);
  CHECK_THROWS_WITH_AS(train_scorer(only_real, dev, net, ArcfaceConfig{}, cfg, provider), doctest::Contains("both"), Error);
}

}  // TEST_SUITE
