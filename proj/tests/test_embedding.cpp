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

#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>

#include "cadprompt/embedder.hpp"
#include "cadprompt/embedding.hpp"
#include "cadprompt/png.hpp"
#include "test_support.hpp"

using namespace cadprompt;

TEST(Cosine, KnownValues) {
  EXPECT_DOUBLE_EQ(cosine(EmbeddingVector({1, 0}), EmbeddingVector({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine(EmbeddingVector({1, 0}), EmbeddingVector({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(cosine(EmbeddingVector({1, 0}), EmbeddingVector({-2, 0})), -1.0);
  EXPECT_NEAR(cosine(EmbeddingVector({1, 1}), EmbeddingVector({1, 0})), std::sqrt(0.5), 1e-15);
}

TEST(Cosine, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = testkit::random_unit(rng, 16);
    const auto b = testkit::random_unit(rng, 16);
    std::vector<double> scaled(a.values().begin(), a.values().end());
    for (auto& x : scaled) x *= 37.5;
    const double c = cosine(a, b);
    EXPECT_NEAR(c, cosine(EmbeddingVector(scaled), b), 1e-12);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(Cosine, RejectsBadInput) {
  EXPECT_THROW(cosine(EmbeddingVector({1, 0}), EmbeddingVector({1, 0, 0})), Error);
  EXPECT_THROW(cosine(EmbeddingVector({0, 0}), EmbeddingVector({1, 0})), Error);
  EXPECT_THROW(EmbeddingVector({1.0, std::nan("")}), Error);
  try {
    cosine(EmbeddingVector({1, 0}), EmbeddingVector({1, 0, 0}));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(MockEmbedder, DeterministicUnitVectors) {
  MockEmbedder a(64, 5), b(64, 5), c(64, 6);
  const auto x = a.embed_text("a red bike");
  EXPECT_EQ(x.dim(), 64u);
  EXPECT_TRUE(x.is_unit(1e-12));
  EXPECT_EQ(x, b.embed_text("a red bike"));
  EXPECT_NE(x, c.embed_text("a red bike"));
  EXPECT_NE(x, a.embed_text("a blue bike"));
  EXPECT_EQ(a.id(), "mock:64:5");
}

TEST(MockEmbedder, ImageBytesMatchingTextEmbedIdentically) {
  MockEmbedder e(32);
  EXPECT_EQ(e.embed_text("bike"), e.embed_image(as_bytes("bike")));
}

TEST(MockEmbedder, CarriedEmbeddingWins) {
  MockEmbedder e(8);
  std::mt19937_64 rng(1);
  const auto v = testkit::random_unit(rng, 8);
  const auto png = png::encode({2, 2, std::vector<std::uint8_t>(12, 7)}, {{kEmbeddingTextKey, encode_embedding_hex(v)}});
  EXPECT_TRUE(png::has_signature(png));
  const auto got = e.embed_image(png);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(got[i], v[i], 1e-15);

  MockEmbedder wrong(9);
  EXPECT_THROW(wrong.embed_image(png), Error);
}

TEST(EmbeddingHex, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  const auto v = testkit::random_unit(rng, 100);
  EXPECT_EQ(decode_embedding_hex(encode_embedding_hex(v)), v);
  EXPECT_THROW(decode_embedding_hex("abc"), Error);
}

TEST(Png, CorruptCrcIsDetected) {
  auto png = png::encode({1, 1, {1, 2, 3}}, {{"k", "v"}});
  EXPECT_EQ(png::read_text_chunks(png).at("k"), "v");
  png[png.size() - 20] ^= 0xff;
  EXPECT_THROW(png::read_text_chunks(png), Error);
}

TEST(MakeEmbedder, Specs) {
  EXPECT_EQ(make_embedder("mock")->id(), "mock:512:0");
  EXPECT_EQ(make_embedder("mock:128")->id(), "mock:128:0");
  EXPECT_EQ(make_embedder("mock:128:9")->id(), "mock:128:9");
  EXPECT_THROW(make_embedder("mock:x"), Error);
  EXPECT_THROW(make_embedder("clip"), Error);
  EXPECT_THROW(make_embedder("mock:0"), Error);
}

TEST(HttpEmbedder, TalksToService) {
  MockEmbedder reference(16, 2);
  httplib::Server server;
  server.Get("/v1/info", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"dim":16,"id":"remote-clip"})", "application/json");
  });
  server.Post("/v1/embed/text", [&](const httplib::Request& req, httplib::Response& res) {
    const auto text = nlohmann::json::parse(req.body).at("text").get<std::string>();
    const auto v = reference.embed_text(text);
    res.set_content(nlohmann::json{{"embedding", std::vector<double>(v.values().begin(), v.values().end())}}.dump(),
                    "application/json");
  });
  server.Post("/v1/embed/image", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.body == "bad") {
      res.set_content(R"({"embedding":[1,2,3]})", "application/json");
      return;
    }
    const auto v = reference.embed_image(as_bytes(req.body));
    res.set_content(nlohmann::json{{"embedding", std::vector<double>(v.values().begin(), v.values().end())}}.dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const auto url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  auto e = make_embedder(url);
  EXPECT_EQ(e->id(), "remote-clip");
  EXPECT_EQ(e->dim(), 16u);
  const auto x = e->embed_text("hello");
  const auto y = reference.embed_text("hello");
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(x[i], y[i], 1e-15);
  EXPECT_NEAR(cosine(e->embed_image(as_bytes("hello")), y), 1.0, 1e-12);
  EXPECT_THROW(e->embed_image(as_bytes("bad")), Error);

  server.stop();
  t.join();
  EXPECT_THROW(make_embedder(url), Error);
}
