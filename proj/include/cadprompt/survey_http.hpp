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

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "cadprompt/backend.hpp"
#include "cadprompt/corpus.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/execute.hpp"
#include "cadprompt/genplan.hpp"
#include "cadprompt/retrieval.hpp"
#include "cadprompt/survey.hpp"

namespace cadprompt {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  fs::path data_dir = "survey-data";
  fs::path assignment;
  std::optional<fs::path> artifacts_dir;  // run directory holding the rated images
  std::int64_t min_ms_per_image = 2000;
  Definitions definitions;
  // Designer endpoints, enabled when a corpus is configured.
  std::optional<fs::path> designer_corpus;
  std::string designer_embedder;  // empty: rebuilt from the corpus embedder id
  std::string designer_backend = "mock";
};

/// Loads the service configuration; relative paths resolve against the
/// config file's directory.
inline ServiceConfig load_service_config(const fs::path& path) {
  const auto j = parse_json_file(path);
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_relative() ? base / p : fs::path(p); };
  ServiceConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = resolve(j.value("data_dir", c.data_dir.string()));
    c.assignment = resolve(j.at("assignment").get<std::string>());
    if (j.contains("artifacts_dir")) c.artifacts_dir = resolve(j.at("artifacts_dir").get<std::string>());
    c.min_ms_per_image = j.value("min_ms_per_image", c.min_ms_per_image);
    if (j.contains("definitions")) c.definitions = definitions_from_json(j.at("definitions"));
    if (j.contains("designer")) {
      const auto& d = j.at("designer");
      c.designer_corpus = resolve(d.at("corpus").get<std::string>());
      c.designer_embedder = d.value("embedder", "");
      c.designer_backend = d.value("backend", c.designer_backend);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed service config: ") + e.what());
  }
  return c;
}

inline int http_status(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::duplicate:
    case Errc::out_of_order: return 409;
    case Errc::backend: return 502;
    case Errc::invalid_argument:
    case Errc::out_of_range:
    case Errc::corrupt:
    case Errc::dimension_mismatch: return 400;
    default: return 500;
  }
}

/// HTTP front of SurveyService:
///   GET  /api/session/{rater}/next      POST /api/session/{rater}/rating
///   GET  /api/artifact/{id}/image       GET  /api/definitions
///   GET  /api/admin/progress
/// and, when a designer corpus is configured:
///   POST /api/designer/retrieve         POST /api/designer/generate
///   GET  /api/corpus/{image_id}/image
class SurveyServer {
 public:
  explicit SurveyServer(ServiceConfig config) : config_(std::move(config)) {
    survey_ = std::make_unique<SurveyService>(assignment_from_json(parse_json_file(config_.assignment)),
                                              config_.data_dir, config_.definitions);
    if (config_.artifacts_dir) {
      for (const auto& a : load_artifacts(*config_.artifacts_dir)) {
        images_[a.artifact_id] = *config_.artifacts_dir / a.uri;
      }
    }
    if (config_.designer_corpus) {
      corpus_ = std::make_unique<CorpusStore>(load_corpus(*config_.designer_corpus));
      embedder_ = make_embedder(config_.designer_embedder.empty() ? corpus_->embedder_id()
                                                                   : config_.designer_embedder);
      backend_ = make_backend(config_.designer_backend, *embedder_);
    }
    routes();
  }

  ~SurveyServer() { stop(); }

  /// Binds and serves on a background thread; returns the bound port.
  int start() {
    int port = config_.port;
    if (port == 0) {
      port = server_.bind_to_any_port(config_.host);
    } else if (!server_.bind_to_port(config_.host, port)) {
      port = -1;
    }
    if (port < 0) throw Error(Errc::io, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    port_ = port;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  SurveyService& survey() { return *survey_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static httplib::Server::Handler guarded(F handler) {
    return [handler](const Req& req, Res& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_json(res, {{"error", errc_name(e.code())}, {"message", e.what()}}, http_status(e.code()));
      } catch (const nlohmann::json::exception& e) {
        send_json(res, {{"error", "invalid_argument"}, {"message", e.what()}}, 400);
      } catch (const std::exception& e) {
        send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
      }
    };
  }

  static void send_file(Res& res, const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }

  nlohmann::json next_json(const std::string& rater) {
    const auto item = survey_->get_next(rater);
    nlohmann::json j = {{"rater_id", rater},
                        {"complete", item.complete},
                        {"progress", {{"done", item.progress.done}, {"total", item.progress.total}}}};
    if (item.artifact_id) {
      j["artifact_id"] = *item.artifact_id;
      j["image_url"] = "/api/artifact/" + *item.artifact_id + "/image";
      j["definitions"] = definitions_to_json(survey_->definitions());
    }
    return j;
  }

  void require_designer() const {
    if (!corpus_) throw Error(Errc::not_found, "designer endpoints are not configured");
  }

  void routes() {
    server_.Get(R"(/api/session/([^/]+)/next)", guarded([this](const Req& req, Res& res) {
                  send_json(res, next_json(req.matches[1]));
                }));

    server_.Post(R"(/api/session/([^/]+)/rating)", guarded([this](const Req& req, Res& res) {
                   const auto body = nlohmann::json::parse(req.body);
                   RatingRecord r;
                   r.rater_id = req.matches[1];
                   r.artifact_id = body.at("artifact_id").get<std::string>();
                   r.feasibility = body.at("feasibility").get<int>();
                   r.novelty = body.at("novelty").get<int>();
                   r.elapsed_ms = body.value("elapsed_ms", std::int64_t{0});
                   const auto p = survey_->submit_rating(r);
                   send_json(res, {{"ok", true}, {"progress", {{"done", p.done}, {"total", p.total}}}});
                 }));

    server_.Get(R"(/api/artifact/([^/]+)/image)", guarded([this](const Req& req, Res& res) {
                  const std::string id = req.matches[1];
                  std::optional<fs::path> path;
                  {
                    std::lock_guard lock(images_mutex_);
                    if (auto it = images_.find(id); it != images_.end()) path = it->second;
                  }
                  if (!path) throw Error(Errc::not_found, "no image for artifact '" + id + "'");
                  send_file(res, *path);
                }));

    server_.Get("/api/definitions", guarded([this](const Req&, Res& res) {
                  send_json(res, definitions_to_json(survey_->definitions()));
                }));

    server_.Get("/api/admin/progress", guarded([this](const Req&, Res& res) {
                  send_json(res, survey_->progress_report(config_.min_ms_per_image));
                }));

    server_.Get(R"(/api/corpus/([^/]+)/image)", guarded([this](const Req& req, Res& res) {
                  require_designer();
                  const auto* entry = corpus_->find(req.matches[1]);
                  if (!entry) throw Error(Errc::not_found, "no corpus image '" + std::string(req.matches[1]) + "'");
                  send_file(res, entry->uri);
                }));

    server_.Post("/api/designer/retrieve", guarded([this](const Req& req, Res& res) {
                   require_designer();
                   const auto body = nlohmann::json::parse(req.body);
                   send_json(res, retrieve_json(body.at("prompt").get<std::string>()));
                 }));

    server_.Post("/api/designer/generate", guarded([this](const Req& req, Res& res) {
                   require_designer();
                   send_json(res, designer_generate(nlohmann::json::parse(req.body)));
                 }));
  }

  nlohmann::json retrieve_json(const std::string& prompt) const {
    if (prompt.empty()) throw Error(Errc::invalid_argument, "prompt is empty");
    const auto hit = top_k(*corpus_, prompt, 1, *embedder_).front();
    return {{"image_id", hit.entry->image_id},
            {"score", hit.score},
            {"image_url", "/api/corpus/" + hit.entry->image_id + "/image"}};
  }

  nlohmann::json designer_generate(const nlohmann::json& body) {
    const auto prompt = body.at("prompt").get<std::string>();
    if (prompt.empty()) throw Error(Errc::invalid_argument, "prompt is empty");
    std::optional<double> weight;
    if (body.contains("weight") && !body.at("weight").is_null()) {
      if (!body.at("weight").is_number()) throw Error(Errc::invalid_argument, "weight must be a number or null");
      weight = body.at("weight").get<double>();
      if (!(*weight >= kMinImageWeight && *weight <= kMaxImageWeight)) {
        throw Error(Errc::out_of_range, "weight must be off or within [0.35, 1]");
      }
    }
    const auto seed = body.value("seed", std::uint64_t{0});
    GenerationParams params;
    params.enhancer = true;
    const SettingSpec setting = weight ? SettingSpec{cip_label(*weight), Variant::cip, weight, params}
                                       : SettingSpec{"SD+PM", Variant::base_enhanced, std::nullopt, params};

    nlohmann::json out = {{"setting", setting.label}, {"cad", nullptr}};
    GenerationRequest request{prompt, std::nullopt, std::nullopt, params, 0};
    if (weight) {
      out["cad"] = retrieve_json(prompt);
      request.cad_image = read_file_bytes(corpus_->find(out["cad"]["image_id"].get<std::string>())->uri);
      request.weight = weight;
    }
    const auto prompt_key = std::to_string(fnv1a(as_bytes(prompt)) & 0xffffffffULL);
    nlohmann::json artifacts = nlohmann::json::array();
    for (int r = 1; r <= params.n_images; ++r) {
      request.seed = derive_seed(seed, prompt_key, setting.label, r);
      const std::string id = "designer-" + prompt_key + "_" + file_safe(setting.label) + "_s" +
                             std::to_string(seed) + "_r" + std::to_string(r);
      nlohmann::json tile = {{"artifact_id", id}, {"seed", request.seed}, {"replicate", r}};
      try {
        const auto bytes = backend_->generate(request);
        const auto path = config_.data_dir / "designer" / (id + ".png");
        write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        {
          std::lock_guard lock(images_mutex_);
          images_[id] = path;
        }
        tile["image_url"] = "/api/artifact/" + id + "/image";
      } catch (const std::exception& e) {
        tile["error"] = e.what();
      }
      artifacts.push_back(std::move(tile));
    }
    out["artifacts"] = std::move(artifacts);
    return out;
  }

  ServiceConfig config_;
  std::unique_ptr<SurveyService> survey_;
  std::mutex images_mutex_;
  std::map<std::string, fs::path> images_;
  std::unique_ptr<CorpusStore> corpus_;
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<GenerationBackend> backend_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace cadprompt
