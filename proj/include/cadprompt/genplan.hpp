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
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cadprompt/corpus.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/hashing.hpp"
#include "cadprompt/retrieval.hpp"

namespace cadprompt {

inline constexpr const char* kPlanVersion = "plan/1";
inline constexpr double kMinImageWeight = 0.35;
inline constexpr double kMaxImageWeight = 1.0;

/// Parameters held fixed across every setting of an experiment.
struct GenerationParams {
  int n_images = 4;
  int width = 1024;
  int height = 768;
  double guidance_scale = 7.0;
  bool enhancer = false;
  double enhancer_strength = 0.3;

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

enum class Variant { base, base_enhanced, cip };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::base: return "BASE";
    case Variant::base_enhanced: return "BASE_ENHANCED";
    case Variant::cip: return "CIP";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "BASE") return Variant::base;
  if (s == "BASE_ENHANCED") return Variant::base_enhanced;
  if (s == "CIP") return Variant::cip;
  throw Error(Errc::invalid_argument, "unknown setting variant '" + s + "'");
}

struct SettingSpec {
  std::string label;
  Variant variant = Variant::base;
  std::optional<double> weight;  // present iff variant == cip
  GenerationParams params;

  friend bool operator==(const SettingSpec&, const SettingSpec&) = default;
};

/// "0.35" -> "0.35", 0.5 -> "0.5", 1.0 -> "1".
inline std::string format_weight(double w) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << w;
  auto s = os.str();
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

inline std::string cip_label(double w) { return "CIP(" + format_weight(w) + ")"; }

inline void validate_setting(const SettingSpec& s) {
  if (s.label.empty()) throw Error(Errc::invalid_argument, "setting label is empty");
  if (s.params.n_images < 1) {
    throw Error(Errc::invalid_argument, "setting '" + s.label + "' must generate at least one image");
  }
  if (s.variant == Variant::cip) {
    if (!s.weight) throw Error(Errc::invalid_argument, "CIP setting '" + s.label + "' has no weight");
    if (!(*s.weight >= kMinImageWeight && *s.weight <= kMaxImageWeight)) {
      throw Error(Errc::out_of_range, "CIP weight " + std::to_string(*s.weight) + " of '" + s.label +
                                          "' is outside [0.35, 1]");
    }
    if (!s.params.enhancer) {
      throw Error(Errc::invalid_argument, "CIP setting '" + s.label + "' must enable the enhancer");
    }
  } else if (s.weight) {
    throw Error(Errc::invalid_argument, "non-CIP setting '" + s.label + "' carries a weight");
  }
}

inline void validate_settings(const std::vector<SettingSpec>& settings) {
  std::set<std::string> labels;
  for (const auto& s : settings) {
    validate_setting(s);
    if (!labels.insert(s.label).second) {
      throw Error(Errc::duplicate, "duplicate setting label '" + s.label + "'");
    }
  }
}

/// n evenly spaced values from lo to hi inclusive, each truncated (toward
/// zero) to two decimals. The 1e-9 guard keeps representation error such as
/// 0.35 * 100 == 34.999... from losing a cent.
inline std::vector<double> weight_grid(double lo, double hi, int n) {
  if (!(lo < hi)) throw Error(Errc::invalid_argument, "weight_grid requires lo < hi");
  if (n < 2) throw Error(Errc::invalid_argument, "weight_grid requires n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double x = (i == n - 1) ? hi : lo + step * i;
    out[static_cast<std::size_t>(i)] = std::trunc(x * 100.0 + (x >= 0 ? 1e-9 : -1e-9)) / 100.0;
  }
  return out;
}

/// The seven-setting grid: base model, base + enhancer, and enhancer + CAD
/// image prompting at five weights spread over [0.35, 1].
inline std::vector<SettingSpec> default_settings_grid() {
  std::vector<SettingSpec> grid;
  GenerationParams base;
  GenerationParams enhanced;
  enhanced.enhancer = true;
  grid.push_back({"SD", Variant::base, std::nullopt, base});
  grid.push_back({"SD+PM", Variant::base_enhanced, std::nullopt, enhanced});
  for (double w : weight_grid(kMinImageWeight, kMaxImageWeight, 5)) {
    grid.push_back({cip_label(w), Variant::cip, w, enhanced});
  }
  return grid;
}

struct Prompt {
  std::string prompt_id;
  std::string text;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct CadPrompt {
  std::string image_id;
  std::string uri;
  double score = 0.0;

  friend bool operator==(const CadPrompt&, const CadPrompt&) = default;
};

using CellKey = std::tuple<std::string, std::string, int>;  // prompt_id, setting label, replicate

struct GenerationPlan {
  std::uint64_t master_seed = 0;
  std::string embedder_id;
  std::vector<Prompt> prompts;
  std::vector<SettingSpec> settings;
  std::map<CellKey, std::uint64_t> seeds;
  std::map<std::string, CadPrompt> cad_prompt;

  friend bool operator==(const GenerationPlan&, const GenerationPlan&) = default;
};

/// Pure function of its inputs; re-planning never changes a cell's seed.
inline std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& prompt_id,
                                 const std::string& label, int replicate) {
  std::uint64_t h = hash_combine(master_seed, fnv1a(prompt_id));
  h = hash_combine(h, fnv1a(label));
  h = hash_combine(h, static_cast<std::uint64_t>(replicate));
  return h & 0xffffffffULL;
}

inline std::vector<Prompt> parse_prompts(const nlohmann::json& doc) {
  std::vector<Prompt> prompts;
  std::set<std::string> ids;
  try {
    for (const auto& item : doc) {
      const auto& id = item.at("prompt_id");
      Prompt p{id.is_string() ? id.get<std::string>() : id.dump(), item.at("text").get<std::string>()};
      if (!ids.insert(p.prompt_id).second) {
        throw Error(Errc::duplicate, "duplicate prompt_id '" + p.prompt_id + "'");
      }
      prompts.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed prompt file: ") + e.what());
  }
  return prompts;
}

inline std::vector<Prompt> load_prompts(const fs::path& path) { return parse_prompts(parse_json_file(path)); }

/// Expands prompts x settings x replicates. The CAD image for a prompt is
/// retrieved once and shared by all CIP settings. `corpus` may be null when
/// no CIP setting is present.
inline GenerationPlan build_plan(const std::vector<Prompt>& prompts, const std::vector<SettingSpec>& settings,
                                 const CorpusStore* corpus, const Embedder& embedder,
                                 std::uint64_t master_seed) {
  if (prompts.empty()) throw Error(Errc::invalid_argument, "plan needs at least one prompt");
  if (settings.empty()) throw Error(Errc::invalid_argument, "plan needs at least one setting");
  validate_settings(settings);
  std::set<std::string> ids;
  for (const auto& p : prompts) {
    if (!ids.insert(p.prompt_id).second) {
      throw Error(Errc::duplicate, "duplicate prompt_id '" + p.prompt_id + "'");
    }
  }

  GenerationPlan plan;
  plan.master_seed = master_seed;
  plan.embedder_id = embedder.id();
  plan.prompts = prompts;
  plan.settings = settings;

  const bool needs_cad = std::any_of(settings.begin(), settings.end(),
                                     [](const SettingSpec& s) { return s.variant == Variant::cip; });
  if (needs_cad) {
    if (corpus == nullptr || corpus->empty()) {
      throw Error(Errc::invalid_argument, "CIP settings require a nonempty corpus");
    }
    for (const auto& p : prompts) {
      const auto hits = top_k(*corpus, p.text, 1, embedder);
      plan.cad_prompt[p.prompt_id] = {hits[0].entry->image_id, hits[0].entry->uri, hits[0].score};
    }
  }
  for (const auto& p : prompts) {
    for (const auto& s : settings) {
      for (int r = 1; r <= s.params.n_images; ++r) {
        plan.seeds[{p.prompt_id, s.label, r}] = derive_seed(master_seed, p.prompt_id, s.label, r);
      }
    }
  }
  return plan;
}

struct PlannedCell {
  const Prompt* prompt = nullptr;
  const SettingSpec* setting = nullptr;
  int replicate = 0;
  std::uint64_t seed = 0;

  CellKey key() const { return {prompt->prompt_id, setting->label, replicate}; }
};

/// Cells in canonical order: prompt-major, then setting, then replicate.
inline std::vector<PlannedCell> planned_cells(const GenerationPlan& plan) {
  std::vector<PlannedCell> cells;
  for (const auto& p : plan.prompts) {
    for (const auto& s : plan.settings) {
      for (int r = 1; r <= s.params.n_images; ++r) {
        auto it = plan.seeds.find({p.prompt_id, s.label, r});
        if (it == plan.seeds.end()) {
          throw Error(Errc::corrupt, "plan has no seed for cell (" + p.prompt_id + ", " + s.label +
                                         ", " + std::to_string(r) + ")");
        }
        cells.push_back({&p, &s, r, it->second});
      }
    }
  }
  return cells;
}

inline std::size_t plan_cardinality(const GenerationPlan& plan) {
  std::size_t per_prompt = 0;
  for (const auto& s : plan.settings) per_prompt += static_cast<std::size_t>(s.params.n_images);
  return plan.prompts.size() * per_prompt;
}

inline nlohmann::json params_to_json(const GenerationParams& p) {
  return {{"n_images", p.n_images},       {"width", p.width},       {"height", p.height},
          {"guidance_scale", p.guidance_scale}, {"enhancer", p.enhancer},
          {"enhancer_strength", p.enhancer_strength}};
}

inline GenerationParams params_from_json(const nlohmann::json& j) {
  GenerationParams p;
  p.n_images = j.at("n_images").get<int>();
  p.width = j.at("width").get<int>();
  p.height = j.at("height").get<int>();
  p.guidance_scale = j.at("guidance_scale").get<double>();
  p.enhancer = j.at("enhancer").get<bool>();
  p.enhancer_strength = j.at("enhancer_strength").get<double>();
  return p;
}

inline nlohmann::json setting_to_json(const SettingSpec& s) {
  return {{"label", s.label},
          {"variant", variant_name(s.variant)},
          {"weight", s.weight ? nlohmann::json(*s.weight) : nlohmann::json(nullptr)},
          {"params", params_to_json(s.params)}};
}

inline SettingSpec setting_from_json(const nlohmann::json& j) {
  SettingSpec s;
  s.label = j.at("label").get<std::string>();
  s.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("weight") && !j.at("weight").is_null()) s.weight = j.at("weight").get<double>();
  s.params = params_from_json(j.at("params"));
  return s;
}

inline nlohmann::json plan_to_json(const GenerationPlan& plan) {
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& p : plan.prompts) prompts.push_back({{"prompt_id", p.prompt_id}, {"text", p.text}});
  nlohmann::json settings = nlohmann::json::array();
  for (const auto& s : plan.settings) settings.push_back(setting_to_json(s));
  nlohmann::json cad = nlohmann::json::object();
  for (const auto& [pid, c] : plan.cad_prompt) {
    cad[pid] = {{"image_id", c.image_id}, {"uri", c.uri}, {"score", c.score}};
  }
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& [key, seed] : plan.seeds) {
    const auto& [pid, label, rep] = key;
    seeds.push_back({{"prompt_id", pid}, {"setting_label", label}, {"replicate", rep}, {"seed", seed}});
  }
  return {{"version", kPlanVersion}, {"master_seed", plan.master_seed}, {"embedder_id", plan.embedder_id},
          {"prompts", prompts},      {"settings", settings},           {"cad_prompt", cad},
          {"seeds", seeds}};
}

inline GenerationPlan plan_from_json(const nlohmann::json& j) {
  GenerationPlan plan;
  try {
    const auto version = j.at("version").get<std::string>();
    if (version != kPlanVersion) {
      throw Error(Errc::version_mismatch, "plan version '" + version + "' is not '" + kPlanVersion + "'");
    }
    plan.master_seed = j.at("master_seed").get<std::uint64_t>();
    plan.embedder_id = j.at("embedder_id").get<std::string>();
    for (const auto& p : j.at("prompts")) {
      plan.prompts.push_back({p.at("prompt_id").get<std::string>(), p.at("text").get<std::string>()});
    }
    for (const auto& s : j.at("settings")) plan.settings.push_back(setting_from_json(s));
    for (const auto& [pid, c] : j.at("cad_prompt").items()) {
      plan.cad_prompt[pid] = {c.at("image_id").get<std::string>(), c.at("uri").get<std::string>(),
                              c.at("score").get<double>()};
    }
    for (const auto& s : j.at("seeds")) {
      plan.seeds[{s.at("prompt_id").get<std::string>(), s.at("setting_label").get<std::string>(),
                  s.at("replicate").get<int>()}] = s.at("seed").get<std::uint64_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed plan: ") + e.what());
  }
  validate_settings(plan.settings);
  for (const auto& s : plan.settings) {
    if (s.variant != Variant::cip) continue;
    for (const auto& p : plan.prompts) {
      if (!plan.cad_prompt.contains(p.prompt_id)) {
        throw Error(Errc::corrupt, "plan lacks a CAD prompt for prompt '" + p.prompt_id + "'");
      }
    }
  }
  planned_cells(plan);
  return plan;
}

inline void save_plan(const GenerationPlan& plan, const fs::path& path) {
  write_file_atomic(path, plan_to_json(plan).dump(1) + "\n");
}

inline GenerationPlan load_plan(const fs::path& path) { return plan_from_json(parse_json_file(path)); }

}  // namespace cadprompt
