// Copyright 2026 The cadprompt Authors.
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

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cadprompt/embedding.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/execute.hpp"

namespace cadprompt {

struct SetSimilarity {
  double mean = 0.0;
  std::size_t count = 0;
};

/// Mean pairwise cosine between two groups of images. Across groups every
/// |A| x |B| pair counts; within one group (same_set, B is ignored) only
/// distinct unordered pairs count, so the diagonal of a matrix is generally
/// below 1.
inline SetSimilarity set_similarity(std::span<const EmbeddingVector> a, std::span<const EmbeddingVector> b,
                                    bool same_set) {
  if (a.empty()) throw Error(Errc::invalid_argument, "set_similarity of an empty set");
  double sum = 0.0;
  std::size_t count = 0;
  if (same_set) {
    if (a.size() < 2) throw Error(Errc::invalid_argument, "within-set similarity needs at least two images");
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) {
        sum += cosine(a[i], a[j]);
        ++count;
      }
    }
  } else {
    if (b.empty()) throw Error(Errc::invalid_argument, "set_similarity of an empty set");
    for (const auto& x : a) {
      for (const auto& y : b) {
        sum += cosine(x, y);
        ++count;
      }
    }
  }
  return {std::clamp(sum / static_cast<double>(count), -1.0, 1.0), count};
}

struct SimilarityMatrix {
  std::string prompt_id;  // "*" for an aggregate across prompts
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::size_t>> pair_counts;
};

using EmbeddingGroups = std::map<std::string, std::vector<EmbeddingVector>>;

inline SimilarityMatrix similarity_matrix(const std::string& prompt_id, const std::vector<std::string>& labels,
                                          const EmbeddingGroups& groups) {
  std::vector<const std::vector<EmbeddingVector>*> ordered;
  for (const auto& label : labels) {
    auto it = groups.find(label);
    if (it == groups.end() || it->second.empty()) {
      throw Error(Errc::not_found, "no artifacts for setting '" + label + "' of prompt '" + prompt_id + "'");
    }
    if (it->second.size() < 2) {
      throw Error(Errc::invalid_argument,
                  "setting '" + label + "' of prompt '" + prompt_id + "' has fewer than two artifacts");
    }
    ordered.push_back(&it->second);
  }
  const std::size_t n = labels.size();
  SimilarityMatrix m{prompt_id, labels, std::vector(n, std::vector<double>(n)),
                     std::vector(n, std::vector<std::size_t>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto s = set_similarity(*ordered[i], *ordered[j], i == j);
      m.values[i][j] = m.values[j][i] = s.mean;
      m.pair_counts[i][j] = m.pair_counts[j][i] = s.count;
    }
  }
  return m;
}

/// Setting labels in presentation order: BASE, BASE_ENHANCED, then CIP by
/// ascending weight.
inline std::vector<std::string> ordered_labels(const std::vector<GeneratedArtifact>& artifacts) {
  std::map<std::tuple<int, double, std::string>, std::string> keyed;
  for (const auto& a : artifacts) {
    keyed.emplace(std::tuple{static_cast<int>(a.variant), a.weight.value_or(0.0), a.setting_label},
                  a.setting_label);
  }
  std::vector<std::string> labels;
  for (const auto& [k, label] : keyed) labels.push_back(label);
  return labels;
}

inline SimilarityMatrix similarity_matrix(const std::vector<GeneratedArtifact>& artifacts,
                                          const std::string& prompt_id) {
  std::vector<GeneratedArtifact> mine;
  for (const auto& a : artifacts) {
    if (a.prompt_id == prompt_id) mine.push_back(a);
  }
  if (mine.empty()) throw Error(Errc::not_found, "no artifacts for prompt '" + prompt_id + "'");
  EmbeddingGroups groups;
  for (const auto& a : mine) groups[a.setting_label].push_back(a.embedding);
  return similarity_matrix(prompt_id, ordered_labels(mine), groups);
}

/// Element-wise mean of per-prompt matrices sharing one label order. A
/// convenience summary; pair_counts are summed.
inline SimilarityMatrix average_matrices(const std::vector<SimilarityMatrix>& matrices) {
  if (matrices.empty()) throw Error(Errc::invalid_argument, "no matrices to average");
  SimilarityMatrix out = matrices.front();
  out.prompt_id = "*";
  for (std::size_t k = 1; k < matrices.size(); ++k) {
    if (matrices[k].labels != out.labels) {
      throw Error(Errc::invalid_argument, "matrices for prompts '" + out.prompt_id + "' and '" +
                                              matrices[k].prompt_id + "' have different settings");
    }
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
      for (std::size_t j = 0; j < out.labels.size(); ++j) {
        out.values[i][j] += matrices[k].values[i][j];
        out.pair_counts[i][j] += matrices[k].pair_counts[i][j];
      }
    }
  }
  for (auto& row : out.values) {
    for (auto& v : row) v /= static_cast<double>(matrices.size());
  }
  return out;
}

/// Upper triangle populated, labels as the header row and first column.
inline std::string matrix_to_csv(const SimilarityMatrix& m) {
  std::ostringstream os;
  for (const auto& label : m.labels) os << ',' << label;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    os << m.labels[i];
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      os << ',';
      if (j >= i) {
        std::snprintf(buf, sizeof buf, "%.6f", m.values[i][j]);
        os << buf;
      }
    }
    os << '\n';
  }
  return os.str();
}

inline nlohmann::json matrix_to_json(const SimilarityMatrix& m) {
  return {{"prompt_id", m.prompt_id},
          {"labels", m.labels},
          {"values", m.values},
          {"pair_counts", m.pair_counts},
          {"diagonal", "distinct unordered pairs, self-pairs excluded"}};
}

}  // namespace cadprompt
