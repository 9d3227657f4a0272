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

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamStateT<T>& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) {
    throw Error("adam_step: shape mismatch (" + std::to_string(params.size()) + " params, " +
                std::to_string(grads.size()) + " grads)");
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), T(0));
    state.v.assign(params.size(), T(0));
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("adam_step: optimizer state does not match parameter count");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double lr_t = cfg.lr * std::sqrt(1.0 - std::pow(cfg.beta2, t)) / (1.0 - std::pow(cfg.beta1, t));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step = static_cast<T>(lr_t), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    params[i] -= step * state.m[i] / (std::sqrt(state.v[i]) + eps);
  }
}

template void adam_step(std::span<float>, std::span<const float>, AdamStateT<float>&, const TrainConfig&);
template void adam_step(std::span<double>, std::span<const double>, AdamStateT<double>&, const TrainConfig&);

}  // namespace ttsel
