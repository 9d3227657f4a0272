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
#include <fstream>
#include <limits>
#include <sstream>

#include "ttsel/common.hpp"
#include "ttsel/kernels.hpp"
#include "ttsel/ulm.hpp"

namespace ttsel {

namespace {

double sqdist(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

constexpr char kMagic[4] = {'T', 'T', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::vector<float> Codebook::transposed() const {
  std::vector<float> t(centroids.size());
  kernels::transpose(k, dim, centroids.data(), dim, t.data(), k);
  return t;
}

Codebook train_codebook(std::span<const float> frames, int dim, int k, std::uint64_t seed, int max_iters) {
  if (dim < 1) throw Error("k-means: dimension must be >= 1");
  if (k < 2) throw Error("k-means: K must be >= 2");
  if (frames.size() % static_cast<std::size_t>(dim) != 0) throw Error("k-means: ragged frame buffer");
  const std::size_t n = frames.size() / static_cast<std::size_t>(dim);
  if (n < static_cast<std::size_t>(k)) {
    throw Error("k-means: need at least K frames (" + std::to_string(n) + " < " + std::to_string(k) + ")");
  }
  const std::vector<double> x(frames.begin(), frames.end());
  auto point = [&](std::size_t i) { return x.data() + i * static_cast<std::size_t>(dim); };

  // k-means++ seeding.
  Rng rng(derive_seed(seed, "kmeans++"));
  std::vector<double> c(static_cast<std::size_t>(k) * dim);
  auto centroid = [&](int j) { return c.data() + static_cast<std::size_t>(j) * dim; };
  std::vector<double> best(n);
  std::size_t first = rng.below(n);
  std::copy(point(first), point(first) + dim, centroid(0));
  for (std::size_t i = 0; i < n; ++i) best[i] = sqdist(point(i), centroid(0), dim);
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (double d : best) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best[i];
        if (acc > r && best[i] > 0.0) {
          pick = i;
          break;
        }
      }
      // Walked off the end by rounding: take the last point with mass.
      while (best[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = rng.below(n);
    }
    std::copy(point(pick), point(pick) + dim, centroid(j));
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], sqdist(point(i), centroid(j), dim));
  }

  Codebook cb;
  cb.k = k;
  cb.dim = dim;
  cb.seed = seed;
  std::vector<int> assign(n, -1), prev(n, -1);
  std::vector<double> dist(n);
  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = sqdist(point(i), centroid(0), dim);
      for (int j = 1; j < k; ++j) {
        const double d = sqdist(point(i), centroid(j), dim);
        if (d < bd) {
          bd = d;
          arg = j;
        }
      }
      assign[i] = arg;
      dist[i] = bd;
      inertia += bd;
    }
    cb.inertia_history.push_back(inertia);
    cb.iterations = iter + 1;
    if (assign == prev) break;
    prev = assign;

    std::vector<double> sum(c.size(), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[assign[i]];
      double* s = sum.data() + static_cast<std::size_t>(assign[i]) * dim;
      for (int d = 0; d < dim; ++d) s[d] += point(i)[d];
    }
    std::vector<bool> taken(n, false);
    for (int j = 0; j < k; ++j) {
      if (count[j] > 0) {
        for (int d = 0; d < dim; ++d) {
          centroid(j)[d] = sum[static_cast<std::size_t>(j) * dim + d] / static_cast<double>(count[j]);
        }
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > fd) {
          fd = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      std::copy(point(far), point(far) + dim, centroid(j));
    }
  }
  cb.centroids.assign(c.begin(), c.end());
  return cb;
}

UnitSequence quantize(const FeatureMatrix& features, const Codebook& codebook, std::string utterance_id) {
  if (static_cast<int>(features.dims) != codebook.dim) {
    throw Error("quantize: feature dimension " + std::to_string(features.dims) + " does not match codebook (" +
                std::to_string(codebook.dim) + ")");
  }
  const auto ct = codebook.transposed();
  UnitSequence seq{std::move(utterance_id), std::vector<int>(features.frames)};
  std::vector<float> d(static_cast<std::size_t>(codebook.k));
  for (std::size_t t = 0; t < features.frames; ++t) {
    kernels::squared_distances(features.row(t).data(), codebook.dim, ct.data(), codebook.k, d.data());
    seq.units[t] = kernels::argmin(d.data(), codebook.k);
  }
  return seq;
}

void save_codebook(const Codebook& cb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write codebook: " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(cb.k));
  write_u32(out, static_cast<std::uint32_t>(cb.dim));
  write_u64(out, cb.seed);
  write_f32s(out, cb.centroids.data(), cb.centroids.size());
  if (!out) throw Error("write failed: " + path.string());
}

Codebook load_codebook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open codebook: " + path.string());
  const std::string what = "codebook " + path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
    throw Error(what + ": bad magic");
  }
  if (read_u32(in, what) != kVersion) throw Error(what + ": unsupported version");
  Codebook cb;
  cb.k = static_cast<int>(read_u32(in, what));
  cb.dim = static_cast<int>(read_u32(in, what));
  cb.seed = read_u64(in, what);
  if (cb.k < 2 || cb.dim < 1) throw Error(what + ": invalid shape");
  cb.centroids.resize(static_cast<std::size_t>(cb.k) * cb.dim);
  read_f32s(in, cb.centroids.data(), cb.centroids.size(), what);
  return cb;
}

std::string unit_sequences_to_tsv(const std::vector<UnitSequence>& seqs) {
  std::string out;
  for (const auto& s : seqs) {
    out += s.utterance_id;
    out += '\t';
    for (std::size_t i = 0; i < s.units.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(s.units[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<UnitSequence> parse_unit_sequences(std::string_view tsv, std::string_view name) {
  std::vector<UnitSequence> out;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(std::string(name) + ":" + std::to_string(line_no) + ": expected id<TAB>units");
    }
    UnitSequence s;
    s.utterance_id = line.substr(0, tab);
    std::istringstream units(line.substr(tab + 1));
    int u;
    while (units >> u) s.units.push_back(u);
    if (!units.eof()) throw Error(std::string(name) + ":" + std::to_string(line_no) + ": invalid unit");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ttsel
