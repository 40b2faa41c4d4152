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

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "cadprompt/corpus.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/embedding.hpp"
#include "cadprompt/error.hpp"

namespace cadprompt {

struct RetrievalHit {
  const CorpusEntry* entry = nullptr;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Exact exhaustive scan. Hits are ordered by descending cosine, ties by
/// ascending image_id; k larger than the corpus returns every entry.
inline std::vector<RetrievalHit> top_k(const CorpusStore& store, const EmbeddingVector& query,
                                       std::size_t k) {
  if (store.empty()) throw Error(Errc::invalid_argument, "retrieval over an empty corpus");
  if (k == 0) throw Error(Errc::invalid_argument, "k must be at least 1");
  if (query.dim() != store.dim()) {
    throw Error(Errc::dimension_mismatch, "query dimension " + std::to_string(query.dim()) +
                                              " does not match corpus dimension " +
                                              std::to_string(store.dim()));
  }
  std::vector<RetrievalHit> hits;
  hits.reserve(store.size());
  for (const auto& entry : store.entries()) {
    hits.push_back({&entry, cosine(query, entry.embedding), 0});
  }
  const auto before = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry->image_id < b.entry->image_id;
  };
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), before);
  hits.resize(keep);
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
  return hits;
}

inline std::vector<RetrievalHit> top_k(const CorpusStore& store, const std::string& query_text,
                                       std::size_t k, const Embedder& embedder) {
  if (store.empty()) throw Error(Errc::invalid_argument, "retrieval over an empty corpus");
  if (embedder.id() != store.embedder_id()) {
    throw Error(Errc::embedder_mismatch, "embedder '" + embedder.id() +
                                             "' does not match corpus embedder '" +
                                             store.embedder_id() + "'");
  }
  return top_k(store, embedder.embed_text(query_text), k);
}

}  // namespace cadprompt
