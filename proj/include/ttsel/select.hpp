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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "ttsel/corpus.hpp"
#include "ttsel/scorer.hpp"

namespace ttsel {

// Half-open score window [low, high).
struct SelectionRange {
  double low = 0.0;
  double high = 1.0;

  SelectionRange() = default;
  SelectionRange(double lo, double hi);
  bool contains(double s) const { return s >= low && s < high; }
};

struct RangeCriterion {
  SelectionRange range;
};
struct TopFraction {
  double p = 0.3;
};
struct BottomFraction {
  double p = 0.3;
};
struct RandomFraction {
  double p = 0.3;
  std::uint64_t seed = 0;
};
using Criterion = std::variant<RangeCriterion, TopFraction, BottomFraction, RandomFraction>;

// "range:0.2:0.5", "top:0.36", "bottom:0.3", "random:0.3:7" (seed last).
std::string describe(const Criterion& c);
// Inverse of describe; "random:0.3" takes the seed from default_seed.
Criterion parse_criterion(std::string_view s, std::uint64_t default_seed = 0);

struct SelectionResult {
  std::vector<std::string> ids;  // score-file order
  std::string criterion;
  std::size_t pool_size = 0;
  std::vector<std::string> pool;  // every scored id, score-file order

  double fraction() const {
    return pool_size ? static_cast<double>(ids.size()) / static_cast<double>(pool_size) : 0.0;
  }
};

// ceil(p * n), guarded against p * n landing a hair above an integer.
std::size_t fraction_count(double p, std::size_t n);

SelectionResult select(const ScoreFile& scores, const Criterion& criterion);

// Ids in both a and b, ordered as in a. Pools that differ produce a warning
// through warn (when set) and the result is restricted to their overlap.
SelectionResult fuse_intersection(const SelectionResult& a, const SelectionResult& b,
                                  const std::function<void(const std::string&)>& warn = {});

// base entries, then the selected pool entries in selection order.
Manifest build_augmented_manifest(const Manifest& base, const Manifest& pool, const SelectionResult& sel);

// <path>: one id per line. <path>.json: {criterion, pool_size, selected_count,
// fraction, pool}.
void save_selection(const SelectionResult& sel, const std::filesystem::path& path);
SelectionResult load_selection(const std::filesystem::path& path);

}  // namespace ttsel
