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

#include "ttsel/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

#include "ttsel/common.hpp"
#include "ttsel/threading.hpp"

namespace ttsel {

namespace {

constexpr std::string_view kHeader = "id\tscore\tmethod";

struct MethodName {
  ScoreMethod method;
  std::string_view name;
};

constexpr MethodName kMethods[] = {
    {ScoreMethod::kClsXent, "cls_xent"},       {ScoreMethod::kCosArcface, "cos_arcface"},
    {ScoreMethod::kUlmAcc, "ulm_acc"},         {ScoreMethod::kUlmPpl, "ulm_ppl"},
    {ScoreMethod::kConfidence, "confidence"},  {ScoreMethod::kExternal, "external"},
};

}  // namespace

std::string_view method_name(ScoreMethod m) {
  for (const auto& mn : kMethods) {
    if (mn.method == m) return mn.name;
  }
  return "external";
}

ScoreMethod parse_method(std::string_view s) {
  for (const auto& mn : kMethods) {
    if (mn.name == s) return mn.method;
  }
  throw Error("unknown score method \"" + std::string(s) + "\"");
}

std::string score_file_to_tsv(const ScoreFile& f) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& r : f.records) {
    out += r.utterance_id;
    out += '\t';
    out += format_fixed(r.score, 6);
    out += '\t';
    out += method_name(r.method);
    out += '\n';
  }
  return out;
}

ScoreFile parse_score_file(std::string_view tsv, std::string_view name) {
  ScoreFile f;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = std::string(name) + ":" + std::to_string(line_no);
    if (!header) {
      if (line != kHeader) throw Error(where + ": expected header \"id<TAB>score<TAB>method\"");
      header = true;
      continue;
    }
    const auto cols = split(line, '\t');
    if (cols.size() != 3) throw Error(where + ": expected 3 tab-separated columns");
    ScoreRecord r;
    r.utterance_id = cols[0];
    if (r.utterance_id.empty()) throw Error(where + ": empty id");
    try {
      std::size_t used = 0;
      r.score = std::stod(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(where + ": invalid score \"" + cols[1] + "\"");
    }
    if (!std::isfinite(r.score)) throw Error(where + ": non-finite score");
    try {
      r.method = parse_method(cols[2]);
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    f.records.push_back(std::move(r));
  }
  if (!header) throw Error(std::string(name) + ": missing header line");
  return f;
}

ScoreFile load_score_file(const std::filesystem::path& path) {
  return parse_score_file(read_text_file(path.string()), path.string());
}

void save_score_file(const ScoreFile& f, const std::filesystem::path& path) {
  write_text_file(path.string(), score_file_to_tsv(f));
}

double classification_score_from_logits(double z0, double z1) {
  const double m = std::max(z0, z1);
  const double e0 = std::exp(z0 - m);
  const double e1 = std::exp(z1 - m);
  return e1 / (e0 + e1);
}

double classification_score(const ScorerModel& model, const FeatureMatrix& features) {
  if (model.net.head != HeadType::kBce) throw Error("classification_score requires a BCE-head model");
  const auto e = forward_embedding(model, features);
  const auto [z0, z1] = bce_logits(model, std::span<const float>(e));
  return classification_score_from_logits(z0, z1);
}

AverageRealEmbedding average_of_embeddings(std::span<const float> rows, std::size_t dim) {
  if (dim == 0 || rows.empty()) throw Error("average real embedding: no real utterances");
  if (rows.size() % dim != 0) throw Error("average real embedding: ragged embedding buffer");
  const std::size_t n = rows.size() / dim;
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const float* r = rows.data() + i * dim;
    double norm = 0.0;
    for (std::size_t k = 0; k < dim; ++k) norm += static_cast<double>(r[k]) * r[k];
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw NumericalError("average real embedding: zero-norm embedding " + std::to_string(i));
    for (std::size_t k = 0; k < dim; ++k) mean[k] += r[k] / norm;
  }
  double norm = 0.0;
  for (auto& v : mean) {
    v /= static_cast<double>(n);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (!(norm > 1e-12)) throw NumericalError("average real embedding: mean has zero norm");
  for (auto& v : mean) v /= norm;
  return AverageRealEmbedding{std::move(mean), n};
}

AverageRealEmbedding average_real_embedding(const ScorerModel& model, const Manifest& reals,
                                            const FeatureProvider& features, int threads) {
  if (reals.empty()) throw Error("average real embedding: no real utterances");
  const auto E = static_cast<std::size_t>(model.net.embed_dim);
  std::vector<float> rows(reals.size() * E);
  parallel_for(reals.size(), threads, [&](std::size_t i) {
    if (reals[i].label != Label::kReal) {
      throw Error("average real embedding: \"" + reals[i].id + "\" is not labeled real");
    }
    const auto f = features(reals, reals[i]);
    const auto e = forward_embedding(model, f);
    std::copy(e.begin(), e.end(), rows.begin() + static_cast<long>(i * E));
  });
  return average_of_embeddings(rows, E);
}

double cosine_to_average(std::span<const float> embedding, const AverageRealEmbedding& avg) {
  if (embedding.size() != avg.vector.size()) throw Error("similarity: embedding dimension mismatch");
  double dot = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < embedding.size(); ++k) {
    dot += embedding[k] * avg.vector[k];
    norm += static_cast<double>(embedding[k]) * embedding[k];
  }
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw NumericalError("similarity: zero-norm utterance embedding");
  return std::clamp(dot / norm, -1.0, 1.0);
}

double similarity_score(const ScorerModel& model, const FeatureMatrix& features, const AverageRealEmbedding& avg) {
  if (model.net.head != HeadType::kArcface) throw Error("similarity_score requires an Arcface-head model");
  const auto e = forward_embedding(model, features);
  return cosine_to_average(e, avg);
}

void save_average_embedding(const AverageRealEmbedding& avg, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["n_source"] = avg.n_source;
  j["vector"] = avg.vector;
  write_text_file(path.string(), j.dump(1) + "\n");
}

AverageRealEmbedding load_average_embedding(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text_file(path.string()));
    AverageRealEmbedding avg;
    avg.n_source = j.at("n_source").get<std::size_t>();
    avg.vector = j.at("vector").get<std::vector<double>>();
    return avg;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid average embedding file " + path.string() + ": " + e.what());
  }
}

CorpusScores score_corpus(const ScorerModel& model, const Manifest& manifest, ScoreMethod method,
                          const FeatureProvider& features, const AverageRealEmbedding* avg,
                          const ScoreOptions& opts) {
  if (method == ScoreMethod::kClsXent && model.net.head != HeadType::kBce) {
    throw Error("cls_xent scoring requires a BCE-head model");
  }
  if (method == ScoreMethod::kCosArcface) {
    if (model.net.head != HeadType::kArcface) throw Error("cos_arcface scoring requires an Arcface-head model");
    if (!avg) throw Error("cos_arcface scoring requires the average real embedding");
  }
  if (method != ScoreMethod::kClsXent && method != ScoreMethod::kCosArcface) {
    throw Error("score_corpus supports cls_xent and cos_arcface only");
  }
  const std::size_t n = manifest.size();
  const auto bs = static_cast<std::size_t>(std::max(1, opts.batch_size));
  const std::size_t chunks = (n + bs - 1) / bs;
  std::vector<std::optional<double>> score(n);
  std::vector<std::string> error(n);

  parallel_for(chunks, opts.threads, [&](std::size_t c) {
    const std::size_t start = c * bs, end = std::min(n, start + bs);
    std::vector<FeatureMatrix> feats;
    std::vector<std::size_t> idx;
    for (auto i = start; i < end; ++i) {
      try {
        feats.push_back(features(manifest, manifest[i]));
        idx.push_back(i);
      } catch (const std::exception& e) {
        error[i] = e.what();
      }
    }
    if (idx.empty()) return;
    std::vector<const FeatureMatrix*> ptrs;
    for (const auto& f : feats) ptrs.push_back(&f);
    std::vector<float> emb;
    try {
      emb = embed_batch(model, std::span<const FeatureMatrix* const>(ptrs));
    } catch (const std::exception& e) {
      for (auto i : idx) error[i] = e.what();
      return;
    }
    const auto E = static_cast<std::size_t>(model.net.embed_dim);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto row = std::span<const float>(emb).subspan(k * E, E);
      try {
        if (method == ScoreMethod::kClsXent) {
          const auto [z0, z1] = bce_logits(model, row);
          score[idx[k]] = classification_score_from_logits(z0, z1);
        } else {
          score[idx[k]] = cosine_to_average(row, *avg);
        }
      } catch (const std::exception& e) {
        error[idx[k]] = e.what();
      }
    }
  });

  CorpusScores out;
  for (std::size_t i = 0; i < n; ++i) {
    if (score[i]) {
      out.scores.records.push_back(ScoreRecord{manifest[i].id, *score[i], method});
    } else {
      out.failures.push_back(ScoreFailure{manifest[i].id, error[i]});
    }
  }
  return out;
}

CorpusScores score_corpus(const ScorerModel& model, const Manifest& manifest, ScoreMethod method,
                          const DspConfig& dsp, const AverageRealEmbedding* avg, const ScoreOptions& opts) {
  return score_corpus(model, manifest, method, log_mel_provider(dsp), avg, opts);
}

UarReport evaluate_uar(const ScoreFile& scores, const Manifest& truth) {
  std::size_t hit[2] = {0, 0}, total[2] = {0, 0};
  for (const auto& r : scores.records) {
    const auto idx = truth.index_of(r.utterance_id);
    if (!idx) throw Error("evaluate_uar: scored id \"" + r.utterance_id + "\" not in truth manifest");
    const int label = static_cast<int>(truth[*idx].label);
    const int pred = r.score > 0.5 ? 1 : 0;
    ++total[label];
    hit[label] += pred == label;
  }
  if (total[0] == 0 || total[1] == 0) {
    throw Error("evaluate_uar: scored utterances must cover both classes");
  }
  UarReport rep;
  rep.n_real = total[1];
  rep.n_synthetic = total[0];
  rep.recall_real = static_cast<double>(hit[1]) / static_cast<double>(total[1]);
  rep.recall_synthetic = static_cast<double>(hit[0]) / static_cast<double>(total[0]);
  rep.uar = 0.5 * (rep.recall_real + rep.recall_synthetic);
  return rep;
}

}  // namespace ttsel
