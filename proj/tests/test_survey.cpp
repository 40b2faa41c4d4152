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

#include <gtest/gtest.h>

#include <httplib.h>

#include "cadprompt/backend.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/survey_http.hpp"
#include "test_support.hpp"

using namespace cadprompt;
using cadprompt::testkit::TempDir;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::invalid_argument;
}

RatingRecord rating(const std::string& rater, const std::string& artifact, int f = 4, int n = 4) {
  return {rater, artifact, f, n, 3000};
}

}  // namespace

TEST(Survey, FreshRaterGetsFirstItem) {
  TempDir dir;
  const auto plan = build_assignment(420, 30, 140, 10, 7);
  SurveyService survey(plan, dir / "data");
  const auto first = survey.get_next("r01");
  EXPECT_FALSE(first.complete);
  EXPECT_EQ(*first.artifact_id, plan.per_rater.at("r01")[0]);
  EXPECT_EQ(first.progress.done, 0u);
  EXPECT_EQ(first.progress.total, 140u);
  EXPECT_EQ(survey.get_next("r01").artifact_id, first.artifact_id);

  const auto p = survey.submit_rating(rating("r01", *first.artifact_id));
  EXPECT_EQ(p.done, 1u);
  const auto second = survey.get_next("r01");
  EXPECT_EQ(*second.artifact_id, plan.per_rater.at("r01")[1]);
  EXPECT_EQ(second.progress.done, 1u);
}

TEST(Survey, RejectionsLeaveCursorInPlace) {
  TempDir dir;
  const auto plan = build_assignment(4, 2, 2, 1, 1);
  SurveyService survey(plan, dir / "data");
  const auto& list = plan.per_rater.at("r1");
  EXPECT_EQ(code_of([&] { survey.submit_rating(rating("r1", list[0], 8)); }), Errc::out_of_range);
  EXPECT_EQ(code_of([&] { survey.submit_rating(rating("r1", list[1])); }), Errc::out_of_order);
  EXPECT_EQ(code_of([&] { survey.submit_rating(rating("ghost", list[0])); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { survey.get_next("ghost"); }), Errc::not_found);
  EXPECT_EQ(survey.session("r1").cursor, 0u);

  survey.submit_rating(rating("r1", list[0]));
  EXPECT_EQ(code_of([&] { survey.submit_rating(rating("r1", list[0])); }), Errc::duplicate);
  EXPECT_EQ(survey.session("r1").cursor, 1u);

  survey.submit_rating(rating("r1", list[1]));
  const auto done = survey.get_next("r1");
  EXPECT_TRUE(done.complete);
  EXPECT_FALSE(done.artifact_id.has_value());
  EXPECT_TRUE(survey.session("r1").finished_at.has_value());
  EXPECT_EQ(code_of([&] { survey.submit_rating(rating("r1", plan.per_rater.at("r2")[0])); }), Errc::out_of_order);
  EXPECT_EQ(survey.snapshot().size(), 2u);
}

TEST(Survey, RestartResumesFromDisk) {
  TempDir dir;
  const auto plan = build_assignment(12, 3, 8, 2, 4);
  {
    SurveyService survey(plan, dir / "data");
    for (int i = 0; i < 5; ++i) survey.submit_rating(rating("r1", plan.per_rater.at("r1")[i], 1 + i));
    survey.submit_rating(rating("r2", plan.per_rater.at("r2")[0]));
  }
  SurveyService again(plan, dir / "data");
  EXPECT_EQ(again.session("r1").cursor, 5u);
  EXPECT_EQ(again.session("r2").cursor, 1u);
  EXPECT_EQ(*again.get_next("r1").artifact_id, plan.per_rater.at("r1")[5]);
  EXPECT_EQ(code_of([&] { again.submit_rating(rating("r1", plan.per_rater.at("r1")[0])); }), Errc::duplicate);
  EXPECT_EQ(again.snapshot()[2].feasibility, 3);
}

TEST(Survey, TornTrailingLineIsRepaired) {
  TempDir dir;
  const auto plan = build_assignment(4, 2, 2, 1, 1);
  {
    SurveyService survey(plan, dir / "data");
    survey.submit_rating(rating("r1", plan.per_rater.at("r1")[0]));
  }
  {
    std::ofstream out(dir / "data" / kRatingsFile, std::ios::app);
    out << R"({"rater_id":"r1","artifact_id":")";
  }
  SurveyService again(plan, dir / "data");
  EXPECT_EQ(again.session("r1").cursor, 1u);
  again.submit_rating(rating("r1", plan.per_rater.at("r1")[1]));
  EXPECT_EQ(load_ratings(dir / "data" / kRatingsFile).size(), 2u);
}

TEST(Survey, ReplayRejectsForeignRecords) {
  TempDir dir;
  const auto plan = build_assignment(4, 2, 2, 1, 1);
  testkit::write_text(dir / "data" / kRatingsFile,
                      R"({"rater_id":"zz","artifact_id":"img1","feasibility":3,"novelty":3,"elapsed_ms":1})" "\n");
  EXPECT_EQ(code_of([&] { SurveyService(plan, dir / "data"); }), Errc::corrupt);
}

TEST(Survey, ProgressReport) {
  TempDir dir;
  const auto plan = build_assignment(4, 2, 2, 1, 1);
  SurveyService survey(plan, dir / "data");
  survey.submit_rating({"r1", plan.per_rater.at("r1")[0], 3, 3, 100});
  const auto report = survey.progress_report(2000);
  EXPECT_EQ(report.at("ratings_total"), 1);
  EXPECT_EQ(report.at("flagged_raters"), nlohmann::json::array({"r1"}));
  EXPECT_EQ(report.at("images").at(plan.per_rater.at("r1")[0]), 1);
}

TEST(Definitions, JsonRoundTripAndScaleCheck) {
  Definitions d;
  d.novelty = "custom";
  const auto back = definitions_from_json(definitions_to_json(d));
  EXPECT_EQ(back.novelty, "custom");
  EXPECT_EQ(back.scale.size(), 7u);
  EXPECT_THROW(definitions_from_json(nlohmann::json{{"scale", {"a", "b"}}}), Error);
}

class SurveyHttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    MockEmbedder embedder(64);
    const auto corpus = ingest_corpus(testkit::write_corpus_fixture(dir_.path(), 6), embedder);
    save_corpus(corpus, dir_ / "corpus.json");
    const auto plan = build_plan({{"1", "an electric cargo bike"}}, default_settings_grid(), &corpus, embedder, 5);
    MockBackend backend(embedder);
    const auto run = execute_plan(plan, backend, embedder, 2, dir_ / "run");
    std::vector<std::string> ids;
    for (const auto& a : run.artifacts) ids.push_back(a.artifact_id);
    assignment_ = build_assignment(ids, 4, 14, 2, 9);
    testkit::write_text(dir_ / "assignment.json", assignment_to_json(assignment_).dump());
    testkit::write_text(dir_ / "service.json", nlohmann::json{{"port", 0},
                                                              {"data_dir", "data"},
                                                              {"assignment", "assignment.json"},
                                                              {"artifacts_dir", "run"},
                                                              {"min_ms_per_image", 1000},
                                                              {"designer", {{"corpus", "corpus.json"}}}}
                                                   .dump());
  }

  std::unique_ptr<SurveyServer> start(const fs::path& config) {
    auto server = std::make_unique<SurveyServer>(load_service_config(config));
    port_ = server->start();
    return server;
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }

  TempDir dir_;
  AssignmentPlan assignment_;
  int port_ = 0;
};

TEST_F(SurveyHttpTest, RatingFlow) {
  auto server = start(dir_ / "service.json");
  auto c = client();
  auto res = c.Get("/api/session/r1/next");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto body = nlohmann::json::parse(res->body);
  const auto first = assignment_.per_rater.at("r1")[0];
  EXPECT_EQ(body.at("artifact_id"), first);
  EXPECT_EQ(body.at("progress").at("done"), 0);
  EXPECT_EQ(body.at("progress").at("total"), 14);
  EXPECT_TRUE(body.at("definitions").contains("feasibility"));

  auto img = c.Get(body.at("image_url").get<std::string>());
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  EXPECT_TRUE(png::has_signature(as_bytes(img->body)));

  auto post = [&](const std::string& rater, const nlohmann::json& j) {
    return c.Post("/api/session/" + rater + "/rating", j.dump(), "application/json");
  };
  EXPECT_EQ(post("r1", {{"artifact_id", first}, {"feasibility", 9}, {"novelty", 3}})->status, 400);
  EXPECT_EQ(post("r1", {{"artifact_id", assignment_.per_rater.at("r1")[1]}, {"feasibility", 2}, {"novelty", 3}})->status,
            409);
  EXPECT_EQ(post("nobody", {{"artifact_id", first}, {"feasibility", 2}, {"novelty", 3}})->status, 404);
  EXPECT_EQ(post("r1", {{"artifact_id", first}})->status, 400);
  auto ok = post("r1", {{"artifact_id", first}, {"feasibility", 2}, {"novelty", 3}, {"elapsed_ms", 4000}});
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(nlohmann::json::parse(ok->body).at("progress").at("done"), 1);
  EXPECT_EQ(post("r1", {{"artifact_id", first}, {"feasibility", 2}, {"novelty", 3}})->status, 409);

  EXPECT_EQ(c.Get("/api/artifact/nope/image")->status, 404);
  EXPECT_EQ(nlohmann::json::parse(c.Get("/api/definitions")->body).at("scale").size(), 7u);
  const auto progress = nlohmann::json::parse(c.Get("/api/admin/progress")->body);
  EXPECT_EQ(progress.at("ratings_total"), 1);
  EXPECT_EQ(progress.at("images").size(), 28u);
}

TEST_F(SurveyHttpTest, DesignerEndpoints) {
  auto server = start(dir_ / "service.json");
  auto c = client();
  const auto r = c.Post("/api/designer/retrieve", R"({"prompt":"an electric cargo bike"})", "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto hit = nlohmann::json::parse(r->body);
  EXPECT_TRUE(hit.at("image_id").get<std::string>().starts_with("bike"));
  EXPECT_EQ(c.Get(hit.at("image_url").get<std::string>())->status, 200);
  EXPECT_EQ(c.Get("/api/corpus/unknown/image")->status, 404);

  const auto g = c.Post("/api/designer/generate", R"({"prompt":"an electric cargo bike","weight":0.67,"seed":3})",
                        "application/json");
  ASSERT_EQ(g->status, 200);
  const auto gen = nlohmann::json::parse(g->body);
  EXPECT_EQ(gen.at("setting"), "CIP(0.67)");
  EXPECT_EQ(gen.at("cad").at("image_id"), hit.at("image_id"));
  ASSERT_EQ(gen.at("artifacts").size(), 4u);
  for (const auto& tile : gen.at("artifacts")) {
    EXPECT_EQ(c.Get(tile.at("image_url").get<std::string>())->status, 200);
  }
  const auto again = nlohmann::json::parse(
      c.Post("/api/designer/generate", R"({"prompt":"an electric cargo bike","weight":0.67,"seed":3})",
             "application/json")
          ->body);
  EXPECT_EQ(again.at("artifacts"), gen.at("artifacts"));

  const auto off = nlohmann::json::parse(
      c.Post("/api/designer/generate", R"({"prompt":"a bike","weight":null})", "application/json")->body);
  EXPECT_EQ(off.at("setting"), "SD+PM");
  EXPECT_TRUE(off.at("cad").is_null());

  EXPECT_EQ(c.Post("/api/designer/generate", R"({"prompt":"a bike","weight":0.2})", "application/json")->status, 400);
  EXPECT_EQ(c.Post("/api/designer/generate", R"({"prompt":"a bike","weight":1.5})", "application/json")->status, 400);
  EXPECT_EQ(c.Post("/api/designer/generate", R"({"prompt":""})", "application/json")->status, 400);
  EXPECT_EQ(c.Post("/api/designer/retrieve", "not json", "application/json")->status, 400);
}

TEST_F(SurveyHttpTest, DesignerDisabledWithoutCorpus) {
  auto j = nlohmann::json::parse(testkit::read_text(dir_ / "service.json"));
  j.erase("designer");
  testkit::write_text(dir_ / "plain.json", j.dump());
  auto server = start(dir_ / "plain.json");
  auto c = client();
  EXPECT_EQ(c.Post("/api/designer/retrieve", R"({"prompt":"x"})", "application/json")->status, 404);
  EXPECT_EQ(c.Get("/api/session/r2/next")->status, 200);
}

TEST_F(SurveyHttpTest, RestartKeepsAcknowledgedRatings) {
  {
    auto server = start(dir_ / "service.json");
    auto c = client();
    for (int i = 0; i < 3; ++i) {
      const auto next = nlohmann::json::parse(c.Get("/api/session/r3/next")->body);
      const nlohmann::json body = {{"artifact_id", next.at("artifact_id")}, {"feasibility", 5}, {"novelty", 6}};
      ASSERT_EQ(c.Post("/api/session/r3/rating", body.dump(), "application/json")->status, 200);
    }
  }
  auto server = start(dir_ / "service.json");
  const auto next = nlohmann::json::parse(client().Get("/api/session/r3/next")->body);
  EXPECT_EQ(next.at("progress").at("done"), 3);
  EXPECT_EQ(next.at("artifact_id"), assignment_.per_rater.at("r3")[3]);
}
