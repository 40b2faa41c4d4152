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
#include <atomic>
#include <cctype>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cadprompt/backend.hpp"
#include "cadprompt/corpus.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/genplan.hpp"
#include "cadprompt/jsonl.hpp"

namespace cadprompt {

inline constexpr const char* kLedgerFile = "ledger.jsonl";

struct GeneratedArtifact {
  std::string artifact_id;
  std::string prompt_id;
  std::string setting_label;
  Variant variant = Variant::base;
  std::optional<double> weight;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string uri;  // relative to the run directory
  EmbeddingVector embedding;

  CellKey key() const { return {prompt_id, setting_label, replicate}; }
  friend bool operator==(const GeneratedArtifact&, const GeneratedArtifact&) = default;
};

struct FailedCell {
  std::string prompt_id;
  std::string setting_label;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string reason;
};

struct ExecutionReport {
  std::vector<GeneratedArtifact> artifacts;  // every completed cell, plan order
  std::vector<FailedCell> failures;          // cells that failed in this run
  std::size_t skipped = 0;                   // cells already complete before this run
  std::size_t generated = 0;                 // cells completed by this run
};

inline std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
    if (keep) {
      out.push_back(c);
    } else if (out.empty() || out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

inline std::string make_artifact_id(const std::string& prompt_id, const std::string& label, int replicate) {
  return "p" + file_safe(prompt_id) + "_" + file_safe(label) + "_r" + std::to_string(replicate);
}

inline nlohmann::json artifact_to_json(const GeneratedArtifact& a) {
  return {{"status", "ok"},
          {"artifact_id", a.artifact_id},
          {"prompt_id", a.prompt_id},
          {"setting_label", a.setting_label},
          {"variant", variant_name(a.variant)},
          {"weight", a.weight ? nlohmann::json(*a.weight) : nlohmann::json(nullptr)},
          {"replicate", a.replicate},
          {"seed", a.seed},
          {"uri", a.uri},
          {"embedding", std::vector<double>(a.embedding.values().begin(), a.embedding.values().end())}};
}

inline GeneratedArtifact artifact_from_json(const nlohmann::json& j) {
  GeneratedArtifact a;
  try {
    a.artifact_id = j.at("artifact_id").get<std::string>();
    a.prompt_id = j.at("prompt_id").get<std::string>();
    a.setting_label = j.at("setting_label").get<std::string>();
    a.variant = parse_variant(j.at("variant").get<std::string>());
    if (!j.at("weight").is_null()) a.weight = j.at("weight").get<double>();
    a.replicate = j.at("replicate").get<int>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.uri = j.at("uri").get<std::string>();
    a.embedding = EmbeddingVector(j.at("embedding").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed artifact record: ") + e.what());
  }
  return a;
}

inline nlohmann::json failure_to_json(const FailedCell& f) {
  return {{"status", "failed"},   {"prompt_id", f.prompt_id}, {"setting_label", f.setting_label},
          {"replicate", f.replicate}, {"seed", f.seed},           {"reason", f.reason}};
}

/// Completed artifacts recorded in a run directory's ledger, one per cell
/// (the latest success wins), sorted by (prompt_id, setting_label, replicate).
inline std::vector<GeneratedArtifact> load_artifacts(const fs::path& run_dir, bool repair = false) {
  const auto ledger = run_dir / kLedgerFile;
  if (!fs::exists(ledger)) throw Error(Errc::not_found, "no run ledger at '" + ledger.string() + "'");
  std::map<CellKey, GeneratedArtifact> done;
  for (const auto& record : read_jsonl(ledger, repair)) {
    if (record.value("status", "") != "ok") continue;
    auto a = artifact_from_json(record);
    done.insert_or_assign(a.key(), std::move(a));
  }
  std::vector<GeneratedArtifact> out;
  out.reserve(done.size());
  for (auto& [key, a] : done) out.push_back(std::move(a));
  return out;
}

/// Runs every pending cell of `plan`, writing images under `run_dir/images`
/// and one ledger line per finished or failed cell. Cells already recorded as
/// complete are skipped, so re-running resumes. Failures never abort the run.
/// With parallelism > 1 the backend and embedder are called concurrently.
inline ExecutionReport execute_plan(const GenerationPlan& plan, GenerationBackend& backend,
                                    const Embedder& embedder, int parallelism, const fs::path& run_dir) {
  if (parallelism < 1) throw Error(Errc::invalid_argument, "parallelism must be at least 1");
  if (embedder.id() != plan.embedder_id) {
    throw Error(Errc::embedder_mismatch, "embedder '" + embedder.id() + "' does not match plan embedder '" +
                                             plan.embedder_id + "'");
  }
  const auto cells = planned_cells(plan);
  {
    std::set<std::string> ids;
    for (const auto& c : cells) {
      if (!ids.insert(make_artifact_id(c.prompt->prompt_id, c.setting->label, c.replicate)).second) {
        throw Error(Errc::duplicate, "setting labels collide after file-name sanitizing: '" +
                                         c.setting->label + "'");
      }
    }
  }
  fs::create_directories(run_dir / "images");

  std::map<CellKey, GeneratedArtifact> done;
  if (fs::exists(run_dir / kLedgerFile)) {
    for (auto& a : load_artifacts(run_dir, /*repair=*/true)) done.emplace(a.key(), std::move(a));
  }

  std::vector<const PlannedCell*> pending;
  ExecutionReport report;
  for (const auto& c : cells) {
    if (done.contains(c.key())) {
      ++report.skipped;
    } else {
      pending.push_back(&c);
    }
  }

  // CAD image bytes, read once per prompt; a read failure fails that prompt's CIP cells.
  std::map<std::string, Bytes> cad_bytes;
  std::map<std::string, std::string> cad_errors;
  for (const auto* c : pending) {
    if (c->setting->variant != Variant::cip) continue;
    const auto& pid = c->prompt->prompt_id;
    if (cad_bytes.contains(pid) || cad_errors.contains(pid)) continue;
    auto it = plan.cad_prompt.find(pid);
    if (it == plan.cad_prompt.end()) {
      cad_errors[pid] = "plan has no CAD prompt for prompt '" + pid + "'";
      continue;
    }
    try {
      cad_bytes[pid] = read_file_bytes(it->second.uri);
    } catch (const Error& e) {
      cad_errors[pid] = "unreadable CAD image '" + it->second.uri + "': " + e.what();
    }
  }

  JsonlAppender ledger(run_dir / kLedgerFile);
  std::mutex results_mutex;
  std::atomic<std::size_t> next{0};

  auto run_cell = [&](const PlannedCell& c) {
    const auto& pid = c.prompt->prompt_id;
    const auto& s = *c.setting;
    try {
      GenerationRequest req{c.prompt->text, std::nullopt, std::nullopt, s.params, c.seed};
      if (s.variant == Variant::cip) {
        if (auto err = cad_errors.find(pid); err != cad_errors.end()) throw Error(Errc::io, err->second);
        req.cad_image = cad_bytes.at(pid);
        req.weight = s.weight;
      }
      const Bytes image = backend.generate(req);
      GeneratedArtifact a;
      a.artifact_id = make_artifact_id(pid, s.label, c.replicate);
      a.prompt_id = pid;
      a.setting_label = s.label;
      a.variant = s.variant;
      a.weight = s.weight;
      a.replicate = c.replicate;
      a.seed = c.seed;
      a.uri = (fs::path("images") / (a.artifact_id + ".png")).string();
      a.embedding = embedder.embed_image(image).normalized();
      write_file_atomic(run_dir / a.uri,
                        std::string_view(reinterpret_cast<const char*>(image.data()), image.size()));
      ledger.append(artifact_to_json(a));
      std::lock_guard lock(results_mutex);
      done.emplace(a.key(), std::move(a));
      ++report.generated;
    } catch (const std::exception& e) {
      FailedCell f{pid, s.label, c.replicate, c.seed, e.what()};
      ledger.append(failure_to_json(f));
      std::lock_guard lock(results_mutex);
      report.failures.push_back(std::move(f));
    }
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) run_cell(*pending[i]);
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), pending.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }

  for (const auto& c : cells) {
    if (auto it = done.find(c.key()); it != done.end()) report.artifacts.push_back(it->second);
  }
  const auto order = [&](const FailedCell& a, const FailedCell& b) {
    return std::tie(a.prompt_id, a.setting_label, a.replicate) < std::tie(b.prompt_id, b.setting_label, b.replicate);
  };
  std::sort(report.failures.begin(), report.failures.end(), order);
  return report;
}

}  // namespace cadprompt
