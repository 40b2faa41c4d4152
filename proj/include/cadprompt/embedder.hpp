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

#include <bit>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cadprompt/embedding.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/hashing.hpp"
#include "cadprompt/http_util.hpp"
#include "cadprompt/png.hpp"

namespace cadprompt {

using Bytes = std::vector<std::uint8_t>;

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

/// Maps images and text into one shared embedding space.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed_image(std::span<const std::uint8_t> bytes) const = 0;
  virtual EmbeddingVector embed_text(const std::string& text) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
};

// PNG tEXt key under which generated placeholder images carry their latent.
inline constexpr const char* kEmbeddingTextKey = "cadprompt-embedding";

/// Bit-exact hex encoding of an embedding (16 hex digits per IEEE double).
inline std::string encode_embedding_hex(const EmbeddingVector& v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(v.dim() * 16);
  for (double x : v.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(kDigits[(bits >> shift) & 0xf]);
  }
  return out;
}

inline EmbeddingVector decode_embedding_hex(std::string_view hex) {
  if (hex.size() % 16 != 0) throw Error(Errc::corrupt, "embedding hex length not a multiple of 16");
  std::vector<double> values(hex.size() / 16);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    const auto* first = hex.data() + i * 16;
    auto [ptr, ec] = std::from_chars(first, first + 16, bits, 16);
    if (ec != std::errc() || ptr != first + 16) throw Error(Errc::corrupt, "bad embedding hex");
    values[i] = std::bit_cast<double>(bits);
  }
  return EmbeddingVector(std::move(values));
}

/// Deterministic stand-in for a CLIP-style encoder: content bytes are hashed
/// into `dim` uniform values and L2-normalized. Text and images share the
/// hash space, so an image file whose bytes equal a prompt embeds identically.
/// PNGs produced by the mock backend carry their latent in a tEXt chunk; that
/// latent is returned instead of a hash.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dim = 512, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw Error(Errc::invalid_argument, "embedder dimension must be positive");
  }

  EmbeddingVector embed_image(std::span<const std::uint8_t> bytes) const override {
    if (png::has_signature(bytes)) {
      const auto text = png::read_text_chunks(bytes);
      if (auto it = text.find(kEmbeddingTextKey); it != text.end()) {
        auto carried = decode_embedding_hex(it->second);
        if (carried.dim() != dim_) {
          throw Error(Errc::dimension_mismatch, "carried embedding has dimension " +
                                                    std::to_string(carried.dim()) + ", expected " +
                                                    std::to_string(dim_));
        }
        return carried.normalized();
      }
    }
    return from_hash(fnv1a(bytes));
  }

  EmbeddingVector embed_text(const std::string& text) const override {
    return from_hash(fnv1a(as_bytes(text)));
  }

  std::size_t dim() const override { return dim_; }
  std::string id() const override {
    return "mock:" + std::to_string(dim_) + ":" + std::to_string(seed_);
  }

 private:
  EmbeddingVector from_hash(std::uint64_t content) const {
    std::vector<double> values(dim_);
    std::uint64_t state = hash_combine(seed_, content);
    for (auto& v : values) {
      state = splitmix64(state);
      v = unit_symmetric(state);
    }
    return EmbeddingVector(std::move(values)).normalized();
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

/// Client for an embedding HTTP service exposing
///   GET  {base}/info         -> {"dim": D, "id": "..."}
///   POST {base}/embed/text   {"text": "..."} -> {"embedding": [...]}
///   POST {base}/embed/image  raw image bytes -> {"embedding": [...]}
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(60))
      : base_url_(std::move(base_url)), timeout_(timeout) {
    std::tie(origin_, prefix_) = http::split_url(base_url_);
    auto client = http::make_client(origin_, timeout_);
    auto res = client.Get(prefix_ + "/info");
    if (!res || res->status != 200) {
      throw Error(Errc::backend, "embedder info request failed: " + http::describe(res));
    }
    const auto info = parse(res->body);
    dim_ = info.at("dim").get<std::size_t>();
    id_ = info.at("id").get<std::string>();
    if (dim_ == 0) throw Error(Errc::invalid_argument, "embedder dimension must be positive");
  }

  EmbeddingVector embed_image(std::span<const std::uint8_t> bytes) const override {
    auto client = http::make_client(origin_, timeout_);
    auto res = client.Post(prefix_ + "/embed/image",
                           std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                           "application/octet-stream");
    return read_embedding(res);
  }

  EmbeddingVector embed_text(const std::string& text) const override {
    auto client = http::make_client(origin_, timeout_);
    auto res = client.Post(prefix_ + "/embed/text", nlohmann::json{{"text", text}}.dump(),
                           "application/json");
    return read_embedding(res);
  }

  std::size_t dim() const override { return dim_; }
  std::string id() const override { return id_; }

 private:
  static nlohmann::json parse(const std::string& body) {
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::backend, std::string("embedder returned invalid json: ") + e.what());
    }
  }

  EmbeddingVector read_embedding(const httplib::Result& res) const {
    if (!res || res->status != 200) {
      throw Error(Errc::backend, "embedding request failed: " + http::describe(res));
    }
    auto values = parse(res->body).at("embedding").get<std::vector<double>>();
    if (values.size() != dim_) {
      throw Error(Errc::dimension_mismatch, "embedder returned dimension " +
                                                std::to_string(values.size()) + ", expected " +
                                                std::to_string(dim_));
    }
    return EmbeddingVector(std::move(values));
  }

  std::string base_url_;
  std::string origin_;
  std::string prefix_;
  std::chrono::seconds timeout_;
  std::size_t dim_ = 0;
  std::string id_;
};

/// "mock", "mock:D", "mock:D:SEED" or an http(s) URL.
inline std::unique_ptr<Embedder> make_embedder(const std::string& spec) {
  if (http::is_http_url(spec)) return std::make_unique<HttpEmbedder>(spec);
  if (spec.rfind("mock", 0) != 0) {
    throw Error(Errc::invalid_argument, "unknown embedder: " + spec);
  }
  std::size_t dim = 512;
  std::uint64_t seed = 0;
  std::string_view rest = std::string_view(spec).substr(4);
  auto take_number = [&](std::uint64_t& out) {
    if (rest.empty()) return;
    if (rest.front() != ':') throw Error(Errc::invalid_argument, "unknown embedder: " + spec);
    rest.remove_prefix(1);
    const auto end = rest.find(':');
    const auto token = rest.substr(0, end);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw Error(Errc::invalid_argument, "bad embedder spec: " + spec);
    }
    rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
  };
  std::uint64_t d = dim;
  take_number(d);
  take_number(seed);
  if (!rest.empty()) throw Error(Errc::invalid_argument, "bad embedder spec: " + spec);
  dim = static_cast<std::size_t>(d);
  return std::make_unique<MockEmbedder>(dim, seed);
}

}  // namespace cadprompt
