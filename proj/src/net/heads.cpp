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
#include "ttsel/net.hpp"

namespace ttsel {

namespace {

template <typename T>
T norm2(const T* v, int n) {
  T acc = 0;
  for (int i = 0; i < n; ++i) acc += v[i] * v[i];
  return std::sqrt(acc);
}

// Gradient through u = v / |v|: dv = (du - (du . u) u) / |v|.
template <typename T>
void normalize_backward(const T* u, T vnorm, const T* du, int n, T* dv) {
  T proj = 0;
  for (int i = 0; i < n; ++i) proj += du[i] * u[i];
  for (int i = 0; i < n; ++i) dv[i] += (du[i] - proj * u[i]) / vnorm;
}

}  // namespace

template <typename T>
T bce_head_loss(const T* w, const T* b, const T* e, int embed_dim, int label, T weight, T* d_w, T* d_b,
                T* d_e) {
  T z[2] = {b[0], b[1]};
  for (int k = 0; k < embed_dim; ++k) {
    z[0] += w[k] * e[k];
    z[1] += w[embed_dim + k] * e[k];
  }
  const T zmax = std::max(z[0], z[1]);
  const T lse = zmax + std::log(std::exp(z[0] - zmax) + std::exp(z[1] - zmax));
  const T loss = lse - z[label];
  T dz[2];
  for (int c = 0; c < 2; ++c) dz[c] = weight * (std::exp(z[c] - lse) - (c == label ? T(1) : T(0)));
  for (int c = 0; c < 2; ++c) {
    if (d_b) d_b[c] += dz[c];
    for (int k = 0; k < embed_dim; ++k) {
      if (d_w) d_w[c * embed_dim + k] += dz[c] * e[k];
      if (d_e) d_e[k] += dz[c] * w[c * embed_dim + k];
    }
  }
  return loss;
}

template <typename T>
std::vector<T> arcface_cosines(const T* w, int n_classes, const T* e, int embed_dim) {
  const T en = norm2(e, embed_dim);
  if (!(en > T(0))) throw NumericalError("arcface: zero-norm embedding");
  std::vector<T> cos(static_cast<std::size_t>(n_classes));
  for (int j = 0; j < n_classes; ++j) {
    const T* wj = w + static_cast<std::size_t>(j) * embed_dim;
    const T wn = norm2(wj, embed_dim);
    if (!(wn > T(0))) throw NumericalError("arcface: zero-norm class weight row " + std::to_string(j));
    T dot = 0;
    for (int k = 0; k < embed_dim; ++k) dot += wj[k] * e[k];
    cos[j] = dot / (wn * en);
  }
  return cos;
}

template <typename T>
T arcface_head_loss(const T* w, int n_classes, const T* e, int embed_dim, int label, double scale,
                    double margin, T weight, T* d_w, T* d_e) {
  if (label < 0 || label >= n_classes) throw Error("arcface: label out of range");
  const T en = norm2(e, embed_dim);
  if (!(en > T(0))) throw NumericalError("arcface: zero-norm embedding");
  std::vector<T> ehat(static_cast<std::size_t>(embed_dim));
  for (int k = 0; k < embed_dim; ++k) ehat[k] = e[k] / en;

  std::vector<T> wn(static_cast<std::size_t>(n_classes));
  std::vector<T> what(static_cast<std::size_t>(n_classes) * embed_dim);
  std::vector<T> cos(static_cast<std::size_t>(n_classes));
  for (int j = 0; j < n_classes; ++j) {
    const T* wj = w + static_cast<std::size_t>(j) * embed_dim;
    wn[j] = norm2(wj, embed_dim);
    if (!(wn[j] > T(0))) throw NumericalError("arcface: zero-norm class weight row " + std::to_string(j));
    T dot = 0;
    for (int k = 0; k < embed_dim; ++k) {
      what[static_cast<std::size_t>(j) * embed_dim + k] = wj[k] / wn[j];
      dot += what[static_cast<std::size_t>(j) * embed_dim + k] * ehat[k];
    }
    cos[j] = std::clamp(dot, T(-1), T(1));
  }

  const T s = static_cast<T>(scale);
  const T cm = static_cast<T>(std::cos(margin));
  const T sm = static_cast<T>(std::sin(margin));
  const T cy = cos[label];
  const T sy = std::sqrt(std::max(T(0), T(1) - cy * cy));
  // cos(theta_y + m) = cos(theta_y) cos(m) - sin(theta_y) sin(m)
  std::vector<T> logits(static_cast<std::size_t>(n_classes));
  for (int j = 0; j < n_classes; ++j) logits[j] = s * cos[j];
  logits[label] = s * (cy * cm - sy * sm);

  const T lmax = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (T l : logits) sum += std::exp(l - lmax);
  const T lse = lmax + std::log(sum);
  const T loss = lse - logits[label];
  if (!d_w && !d_e) return loss;

  // d loss / d cos_j.
  std::vector<T> dcos(static_cast<std::size_t>(n_classes));
  for (int j = 0; j < n_classes; ++j) {
    const T p = std::exp(logits[j] - lse);
    dcos[j] = weight * s * (p - (j == label ? T(1) : T(0)));
  }
  // d cos(theta + m) / d cos(theta) = cos m + sin m * cos(theta) / sin(theta).
  // The margin term is dropped where sin(theta) vanishes (cos(theta) = +-1).
  const T dmargin = sy > T(1e-12) ? cm + sm * cy / sy : cm;
  dcos[label] *= dmargin;

  std::vector<T> dehat(static_cast<std::size_t>(embed_dim), T(0));
  std::vector<T> dwhat(static_cast<std::size_t>(embed_dim));
  for (int j = 0; j < n_classes; ++j) {
    const T* wh = what.data() + static_cast<std::size_t>(j) * embed_dim;
    for (int k = 0; k < embed_dim; ++k) {
      dehat[k] += dcos[j] * wh[k];
      dwhat[k] = dcos[j] * ehat[k];
    }
    if (d_w) normalize_backward(wh, wn[j], dwhat.data(), embed_dim, d_w + static_cast<std::size_t>(j) * embed_dim);
  }
  if (d_e) normalize_backward(ehat.data(), en, dehat.data(), embed_dim, d_e);
  return loss;
}

template float bce_head_loss(const float*, const float*, const float*, int, int, float, float*, float*, float*);
template double bce_head_loss(const double*, const double*, const double*, int, int, double, double*, double*,
                              double*);
template std::vector<float> arcface_cosines(const float*, int, const float*, int);
template std::vector<double> arcface_cosines(const double*, int, const double*, int);
template float arcface_head_loss(const float*, int, const float*, int, int, double, double, float, float*, float*);
template double arcface_head_loss(const double*, int, const double*, int, int, double, double, double, double*,
                                  double*);

}  // namespace ttsel
