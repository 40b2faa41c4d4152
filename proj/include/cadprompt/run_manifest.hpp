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

#include <optional>
#include <string>

#include "cadprompt/corpus.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/evalstats.hpp"
#include "cadprompt/execute.hpp"
#include "cadprompt/genplan.hpp"

namespace cadprompt {

/// Ties the files of one experiment together. Any field may be omitted
/// while the run is still in progress; present fields must resolve.
struct RunManifest {
  std::string run_id;
  std::optional<fs::path> corpus;
  std::optional<fs::path> plan;
  std::optional<fs::path> artifacts;
  std::optional<fs::path> ratings;
  std::uint64_t seed = 0;
};

inline RunManifest load_run_manifest(const fs::path& path) {
  const auto j = parse_json_file(path);
  const auto base = path.parent_path();
  RunManifest m;
  auto opt_path = [&](const char* key) -> std::optional<fs::path> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    fs::path p = j.at(key).get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  try {
    if (j.value("version", "") != "run/1") throw Error(Errc::version_mismatch, "run manifest version is not 'run/1'");
    m.run_id = j.at("run_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.corpus = opt_path("corpus");
    m.plan = opt_path("plan");
    m.artifacts = opt_path("artifacts");
    m.ratings = opt_path("ratings");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

/// Loads every referenced file, checking versions and cross-file agreement
/// (plan seed and embedder against the manifest and corpus). Returns a short
/// summary.
inline nlohmann::json validate_run(const RunManifest& m) {
  nlohmann::json summary = {{"run_id", m.run_id}, {"seed", m.seed}};
  std::optional<CorpusStore> corpus;
  if (m.corpus) {
    corpus = load_corpus(*m.corpus);
    summary["corpus_entries"] = corpus->size();
  }
  if (m.plan) {
    const auto plan = load_plan(*m.plan);
    if (plan.master_seed != m.seed) {
      throw Error(Errc::version_mismatch, "plan seed " + std::to_string(plan.master_seed) +
                                              " differs from run seed " + std::to_string(m.seed));
    }
    if (corpus && plan.embedder_id != corpus->embedder_id()) {
      throw Error(Errc::embedder_mismatch, "plan embedder '" + plan.embedder_id + "' differs from corpus embedder '" +
                                               corpus->embedder_id() + "'");
    }
    summary["planned_artifacts"] = plan_cardinality(plan);
  }
  if (m.artifacts) summary["artifacts"] = load_artifacts(*m.artifacts).size();
  if (m.ratings) summary["ratings"] = load_ratings(*m.ratings).size();
  return summary;
}

}  // namespace cadprompt
