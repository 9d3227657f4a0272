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

#include "ttsel/select.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "ttsel/common.hpp"

namespace ttsel {

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_number(const std::string& s, std::string_view what) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error("invalid " + std::string(what) + " \"" + s + "\"");
  }
  return v;
}

// Range bounds may be open-ended.
double parse_bound(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_number(s, "range bound");
}

void check_fraction(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw Error("selection fraction must be in (0, 1], got " + shortest(p));
}

// Indices of the m entries that sort first under `before`, ties by id.
template <class Before>
std::vector<std::size_t> first_m(const ScoreFile& scores, std::size_t m, Before before) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto cmp = [&](std::size_t a, std::size_t b) {
    const auto& ra = scores.records[a];
    const auto& rb = scores.records[b];
    if (ra.score != rb.score) return before(ra.score, rb.score);
    return ra.utterance_id < rb.utterance_id;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(m), idx.end(), cmp);
  idx.resize(m);
  return idx;
}

}  // namespace

SelectionRange::SelectionRange(double lo, double hi) : low(lo), high(hi) {
  if (!(lo < hi)) throw Error("selection range needs low < high, got [" + shortest(lo) + ", " + shortest(hi) + ")");
}

std::string describe(const Criterion& c) {
  struct V {
    std::string operator()(const RangeCriterion& r) const {
      return "range:" + shortest(r.range.low) + ":" + shortest(r.range.high);
    }
    std::string operator()(const TopFraction& t) const { return "top:" + shortest(t.p); }
    std::string operator()(const BottomFraction& b) const { return "bottom:" + shortest(b.p); }
    std::string operator()(const RandomFraction& r) const {
      return "random:" + shortest(r.p) + ":" + std::to_string(r.seed);
    }
  };
  return std::visit(V{}, c);
}

Criterion parse_criterion(std::string_view s, std::uint64_t default_seed) {
  const auto parts = split(s, ':');
  const std::string kind = parts.empty() ? std::string() : parts[0];
  auto bad = [&]() -> Error {
    return Error("invalid selection criterion \"" + std::string(s) +
                 "\" (expected range:LOW:HIGH, top:P, bottom:P or random:P[:SEED])");
  };
  if (kind == "range") {
    if (parts.size() != 3) throw bad();
    return RangeCriterion{SelectionRange(parse_bound(parts[1]), parse_bound(parts[2]))};
  }
  if (kind == "top" || kind == "bottom") {
    if (parts.size() != 2) throw bad();
    const double p = parse_number(parts[1], "fraction");
    check_fraction(p);
    if (kind == "top") return TopFraction{p};
    return BottomFraction{p};
  }
  if (kind == "random") {
    if (parts.size() != 2 && parts.size() != 3) throw bad();
    const double p = parse_number(parts[1], "fraction");
    check_fraction(p);
    std::uint64_t seed = default_seed;
    if (parts.size() == 3) {
      const auto r = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), seed);
      if (r.ec != std::errc{} || r.ptr != parts[2].data() + parts[2].size()) throw bad();
    }
    return RandomFraction{p, seed};
  }
  throw bad();
}

std::size_t fraction_count(double p, std::size_t n) {
  check_fraction(p);
  // p * n computed in floating point can overshoot an exact integer
  // (0.07 * 100 = 7.000000000000001), which a bare ceil would bump by one.
  const double x = p * static_cast<double>(n);
  auto m = static_cast<std::size_t>(std::ceil(x - 1e-9));
  if (n > 0 && m == 0) m = 1;
  return std::min(m, n);
}

SelectionResult select(const ScoreFile& scores, const Criterion& criterion) {
  if (scores.empty()) throw Error("select: empty score file");
  SelectionResult res;
  res.criterion = describe(criterion);
  res.pool_size = scores.size();
  res.pool.reserve(scores.size());
  {
    std::unordered_set<std::string> seen;
    for (const auto& r : scores.records) {
      if (!seen.insert(r.utterance_id).second) throw Error("select: duplicate id \"" + r.utterance_id + "\"");
      res.pool.push_back(r.utterance_id);
    }
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> chosen;
  if (const auto* rc = std::get_if<RangeCriterion>(&criterion)) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rc->range.contains(scores.records[i].score)) chosen.push_back(i);
    }
  } else if (const auto* t = std::get_if<TopFraction>(&criterion)) {
    chosen = first_m(scores, fraction_count(t->p, n), std::greater<double>());
  } else if (const auto* b = std::get_if<BottomFraction>(&criterion)) {
    chosen = first_m(scores, fraction_count(b->p, n), std::less<double>());
  } else {
    const auto& r = std::get<RandomFraction>(criterion);
    const std::size_t m = fraction_count(r.p, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(r.seed, "select-random"));
    for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    chosen.assign(idx.begin(), idx.begin() + static_cast<long>(m));
  }
  std::sort(chosen.begin(), chosen.end());
  res.ids.reserve(chosen.size());
  for (auto i : chosen) res.ids.push_back(scores.records[i].utterance_id);
  return res;
}

SelectionResult fuse_intersection(const SelectionResult& a, const SelectionResult& b,
                                  const std::function<void(const std::string&)>& warn) {
  SelectionResult out;
  out.criterion = "intersection(" + a.criterion + ", " + b.criterion + ")";
  const std::unordered_set<std::string> pool_b(b.pool.begin(), b.pool.end());
  const bool same_pool =
      a.pool.size() == b.pool.size() && std::all_of(a.pool.begin(), a.pool.end(), [&](const std::string& id) {
        return pool_b.count(id) > 0;
      });
  if (same_pool) {
    out.pool = a.pool;
  } else {
    for (const auto& id : a.pool) {
      if (pool_b.count(id)) out.pool.push_back(id);
    }
    if (warn) {
      warn("fuse: selections come from different pools (" + std::to_string(a.pool.size()) + " vs " +
           std::to_string(b.pool.size()) + " ids); using the " + std::to_string(out.pool.size()) +
           " ids they share");
    }
  }
  out.pool_size = out.pool.size();
  const std::unordered_set<std::string> in_b(b.ids.begin(), b.ids.end());
  const std::unordered_set<std::string> pool(out.pool.begin(), out.pool.end());
  for (const auto& id : a.ids) {
    if (in_b.count(id) && pool.count(id)) out.ids.push_back(id);
  }
  return out;
}

Manifest build_augmented_manifest(const Manifest& base, const Manifest& pool, const SelectionResult& sel) {
  Manifest out(base.base_dir());
  for (const auto& e : base) out.add(e);
  for (const auto& id : sel.ids) {
    const auto idx = pool.index_of(id);
    if (!idx) throw Error("augmented manifest: selected id \"" + id + "\" is not in the synthetic pool");
    UtteranceEntry e = pool[*idx];
    if (pool.base_dir() != base.base_dir()) {
      // Re-express the path against the base manifest's directory.
      const auto abs = pool.resolve_audio(e);
      const auto rel = abs.lexically_relative(base.base_dir());
      e.audio_path = (rel.empty() ? abs : rel).string();
    }
    out.add(std::move(e));
  }
  return out;
}

void save_selection(const SelectionResult& sel, const std::filesystem::path& path) {
  std::string ids;
  for (const auto& id : sel.ids) ids += id + "\n";
  write_text_file(path.string(), ids);
  nlohmann::ordered_json j;
  j["criterion"] = sel.criterion;
  j["pool_size"] = sel.pool_size;
  j["selected_count"] = sel.ids.size();
  j["fraction"] = sel.fraction();
  j["pool"] = sel.pool;
  write_text_file(path.string() + ".json", j.dump(1) + "\n");
}

SelectionResult load_selection(const std::filesystem::path& path) {
  SelectionResult sel;
  for (const auto& line : split(read_text_file(path.string()), '\n')) {
    const auto id = trim(line);
    if (!id.empty()) sel.ids.push_back(id);
  }
  const std::string side = path.string() + ".json";
  try {
    const auto j = nlohmann::json::parse(read_text_file(side));
    sel.criterion = j.at("criterion").get<std::string>();
    sel.pool_size = j.at("pool_size").get<std::size_t>();
    if (j.contains("pool")) sel.pool = j.at("pool").get<std::vector<std::string>>();
    if (j.at("selected_count").get<std::size_t>() != sel.ids.size()) {
      throw Error("selection " + path.string() + ": sidecar count does not match the id list");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid selection sidecar " + side + ": " + e.what());
  }
  return sel;
}

}  // namespace ttsel
