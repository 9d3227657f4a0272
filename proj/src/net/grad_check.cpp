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

#include "ttsel/net.hpp"

namespace ttsel {

GradCheckReport grad_check(const ScorerModelT<double>& model, std::span<const Example> batch, double tolerance,
                           double step) {
  std::vector<double> analytic;
  compute_loss(model, batch, &analytic);
  ScorerModelT<double> probe = model;
  GradCheckReport rep;
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    const double orig = probe.params[i];
    auto at = [&](double x) {
      probe.params[i] = x;
      return compute_loss(probe, batch, static_cast<std::vector<double>*>(nullptr));
    };
    // Five-point stencil: truncation O(step^4), so the step can stay large
    // enough that roundoff does not swamp small gradients.
    const double numeric =
        (at(orig - 2 * step) - 8.0 * at(orig - step) + 8.0 * at(orig + step) - at(orig + 2 * step)) / (12.0 * step);
    probe.params[i] = orig;
    const double a = analytic[i];
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const double err = scale < 1e-8 ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
    if (err > rep.max_rel_error || rep.checked == 0) {
      rep.max_rel_error = err;
      rep.worst_index = i;
      rep.analytic = a;
      rep.numeric = numeric;
    }
    ++rep.checked;
  }
  if (rep.checked > 0) rep.worst_block = model.layout.block_of(rep.worst_index).name;
  rep.passed = rep.max_rel_error <= tolerance;
  return rep;
}

}  // namespace ttsel
