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

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cadprompt/error.hpp"
#include "cadprompt/evalstats.hpp"
#include "cadprompt/jsonl.hpp"

namespace cadprompt {

inline constexpr const char* kRatingsFile = "ratings.jsonl";

/// Text shown above every rating item. Operator-editable through the service
/// configuration.
struct Definitions {
  std::string feasibility =
      "Feasibility: the state or degree of being easily or conveniently done. A feasible bike could be "
      "manufactured and would work as a bike for a person to ride.";
  std::string novelty =
      "Novelty: the quality of being new, original, or unusual. A novel bike differs noticeably from "
      "bikes you have seen before.";
  std::string feasibility_statement = "The bike is feasible.";
  std::string novelty_statement = "The bike is novel.";
  std::vector<std::string> scale = {"Strongly disagree", "Disagree", "Somewhat disagree",
                                    "Neither agree nor disagree", "Somewhat agree", "Agree",
                                    "Strongly agree"};
};

inline nlohmann::json definitions_to_json(const Definitions& d) {
  return {{"feasibility", d.feasibility},
          {"novelty", d.novelty},
          {"statements", {{"feasibility", d.feasibility_statement}, {"novelty", d.novelty_statement}}},
          {"scale", d.scale}};
}

inline Definitions definitions_from_json(const nlohmann::json& j) {
  Definitions d;
  d.feasibility = j.value("feasibility", d.feasibility);
  d.novelty = j.value("novelty", d.novelty);
  if (j.contains("statements")) {
    d.feasibility_statement = j["statements"].value("feasibility", d.feasibility_statement);
    d.novelty_statement = j["statements"].value("novelty", d.novelty_statement);
  }
  if (j.contains("scale")) d.scale = j["scale"].get<std::vector<std::string>>();
  if (d.scale.size() != static_cast<std::size_t>(kLikertMax)) {
    throw Error(Errc::invalid_argument, "definitions scale must have 7 labels");
  }
  return d;
}

using TimePoint = std::int64_t;  // ms since epoch

inline TimePoint now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct Progress {
  std::size_t done = 0;
  std::size_t total = 0;
};

struct NextItem {
  bool complete = false;
  std::optional<std::string> artifact_id;
  Progress progress;
};

struct SurveySession {
  std::string rater_id;
  std::vector<std::string> assignment;
  std::size_t cursor = 0;
  std::optional<TimePoint> started_at;
  std::optional<TimePoint> finished_at;
  std::set<std::string> rated;
};

/// Forward-only rating sessions over an assignment plan. Every accepted
/// rating is appended and synced to `data_dir/ratings.jsonl` before the
/// cursor moves, and a new service over the same directory resumes from it.
class SurveyService {
 public:
  SurveyService(AssignmentPlan plan, const fs::path& data_dir, Definitions definitions = {})
      : plan_(std::move(plan)), data_dir_(data_dir), definitions_(std::move(definitions)) {
    fs::create_directories(data_dir_);
    for (const auto& id : plan_.rater_ids) {
      auto s = std::make_unique<Slot>();
      s->session.rater_id = id;
      s->session.assignment = plan_.per_rater.at(id);
      slots_.emplace(id, std::move(s));
    }
    replay();
    store_ = std::make_unique<JsonlAppender>(data_dir_ / kRatingsFile);
  }

  const AssignmentPlan& plan() const noexcept { return plan_; }
  const Definitions& definitions() const noexcept { return definitions_; }
  fs::path ratings_path() const { return data_dir_ / kRatingsFile; }

  /// Idempotent until a rating is submitted.
  NextItem get_next(const std::string& rater_id) {
    auto& slot = find(rater_id);
    std::lock_guard lock(slot.mutex);
    auto& s = slot.session;
    if (!s.started_at) s.started_at = now_ms();
    NextItem item;
    item.progress = {s.cursor, s.assignment.size()};
    if (s.cursor == s.assignment.size()) {
      item.complete = true;
    } else {
      item.artifact_id = s.assignment[s.cursor];
    }
    return item;
  }

  Progress submit_rating(const RatingRecord& r) {
    auto& slot = find(r.rater_id);
    std::lock_guard lock(slot.mutex);
    auto& s = slot.session;
    if (s.rated.contains(r.artifact_id)) {
      throw Error(Errc::duplicate, "rater '" + r.rater_id + "' already rated '" + r.artifact_id + "'");
    }
    validate_rating(r);
    if (s.cursor == s.assignment.size()) {
      throw Error(Errc::out_of_order, "session of rater '" + r.rater_id + "' is complete");
    }
    if (s.assignment[s.cursor] != r.artifact_id) {
      throw Error(Errc::out_of_order, "expected rating for '" + s.assignment[s.cursor] + "', got '" +
                                          r.artifact_id + "'");
    }
    auto record = rating_to_json(r);
    record["submitted_at"] = now_ms();
    store_->append(record);
    s.rated.insert(r.artifact_id);
    ++s.cursor;
    if (!s.started_at) s.started_at = record["submitted_at"].get<TimePoint>() - r.elapsed_ms;
    if (s.cursor == s.assignment.size()) s.finished_at = record["submitted_at"].get<TimePoint>();
    return {s.cursor, s.assignment.size()};
  }

  SurveySession session(const std::string& rater_id) {
    auto& slot = find(rater_id);
    std::lock_guard lock(slot.mutex);
    return slot.session;
  }

  bool has_rater(const std::string& rater_id) const { return slots_.contains(rater_id); }

  /// Per-rater cursors and per-image rating counts.
  nlohmann::json progress_report(std::int64_t min_ms_per_image) {
    nlohmann::json raters = nlohmann::json::array();
    std::map<std::string, std::size_t> per_image;
    for (const auto& [id, list] : plan_.per_rater) {
      for (const auto& a : list) per_image.emplace(a, 0);
    }
    std::size_t total = 0;
    for (const auto& id : plan_.rater_ids) {
      auto s = session(id);
      for (const auto& a : s.rated) ++per_image[a];
      total += s.cursor;
      raters.push_back({{"rater_id", id},
                        {"done", s.cursor},
                        {"total", s.assignment.size()},
                        {"complete", s.finished_at.has_value()}});
    }
    std::vector<std::string> flagged;
    if (fs::exists(ratings_path())) {
      flagged = quality_flags(timings_from_ratings(snapshot()), min_ms_per_image);
    }
    return {{"raters", raters},
            {"images", per_image},
            {"ratings_total", total},
            {"flagged_raters", flagged},
            {"min_ms_per_image", min_ms_per_image}};
  }

  /// Every acknowledged rating, as persisted.
  std::vector<RatingRecord> snapshot() const {
    std::vector<RatingRecord> out;
    for (const auto& j : read_jsonl(ratings_path())) out.push_back(rating_from_json(j));
    return out;
  }

 private:
  struct Slot {
    std::mutex mutex;
    SurveySession session;
  };

  Slot& find(const std::string& rater_id) {
    auto it = slots_.find(rater_id);
    if (it == slots_.end()) throw Error(Errc::not_found, "unknown rater '" + rater_id + "'");
    return *it->second;
  }

  void replay() {
    std::size_t line = 0;
    for (const auto& j : read_jsonl(data_dir_ / kRatingsFile, /*repair=*/true)) {
      ++line;
      const auto r = rating_from_json(j);
      auto it = slots_.find(r.rater_id);
      if (it == slots_.end()) {
        throw Error(Errc::corrupt, "ratings line " + std::to_string(line) + " names unknown rater '" +
                                       r.rater_id + "'");
      }
      auto& s = it->second->session;
      if (s.cursor >= s.assignment.size() || s.assignment[s.cursor] != r.artifact_id) {
        throw Error(Errc::corrupt, "ratings line " + std::to_string(line) + " does not follow the assignment of '" +
                                       r.rater_id + "'");
      }
      const auto at = j.value("submitted_at", TimePoint{0});
      if (!s.started_at) s.started_at = at - r.elapsed_ms;
      s.rated.insert(r.artifact_id);
      ++s.cursor;
      if (s.cursor == s.assignment.size()) s.finished_at = at;
    }
  }

  AssignmentPlan plan_;
  fs::path data_dir_;
  Definitions definitions_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  std::unique_ptr<JsonlAppender> store_;
};

}  // namespace cadprompt
