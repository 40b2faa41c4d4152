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

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cadprompt/embedder.hpp"
#include "cadprompt/embedding.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/genplan.hpp"
#include "cadprompt/hashing.hpp"
#include "cadprompt/http_util.hpp"
#include "cadprompt/png.hpp"

namespace cadprompt {

struct GenerationRequest {
  std::string text;
  std::optional<Bytes> cad_image;
  std::optional<double> weight;
  GenerationParams params;
  std::uint64_t seed = 0;
};

/// Text (+ optional weighted image prompt) to image bytes. How the weight
/// blends the two prompts is the backend's concern.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual Bytes generate(const GenerationRequest& request) = 0;
};

/// Offline stand-in for a diffusion service. The output latent is
///   normalize((1 - w) * e_text + w * e_cad)
/// perturbed by a seed-derived vector of length `noise_magnitude` and
/// renormalized; w = 0 without an image prompt. The latent travels inside a
/// small placeholder PNG whose pixels mix a text pattern and a CAD pattern by
/// w, plus seed noise.
class MockBackend final : public GenerationBackend {
 public:
  explicit MockBackend(const Embedder& embedder, double noise_magnitude = 0.05)
      : embedder_(embedder), noise_magnitude_(noise_magnitude) {
    if (!(noise_magnitude_ >= 0.0)) throw Error(Errc::invalid_argument, "noise magnitude must be >= 0");
  }

  static constexpr std::uint32_t kWidth = 16;
  static constexpr std::uint32_t kHeight = 12;

  EmbeddingVector latent(const GenerationRequest& req) const {
    const auto text = embedder_.embed_text(req.text);
    const double w = effective_weight(req);
    std::vector<double> mix(text.values().begin(), text.values().end());
    if (w > 0.0) {
      const auto cad = embedder_.embed_image(*req.cad_image);
      for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = (1.0 - w) * text[i] + w * cad[i];
    }
    auto blended = EmbeddingVector(std::move(mix)).normalized();
    if (noise_magnitude_ == 0.0) return blended;

    std::vector<double> noise(blended.dim());
    std::uint64_t state = hash_combine(req.seed, 0x6e6f697365ULL);
    for (auto& v : noise) {
      state = splitmix64(state);
      v = unit_symmetric(state);
    }
    const auto dir = EmbeddingVector(std::move(noise)).normalized();
    std::vector<double> out(blended.dim());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = blended[i] + noise_magnitude_ * dir[i];
    return EmbeddingVector(std::move(out)).normalized();
  }

  Bytes generate(const GenerationRequest& req) override {
    const double w = effective_weight(req);
    const auto z = latent(req);

    png::RgbImage image{kWidth, kHeight, std::vector<std::uint8_t>(kWidth * kHeight * 3)};
    const std::uint64_t text_key = fnv1a(as_bytes(req.text));
    const std::uint64_t cad_key = req.cad_image ? fnv1a(*req.cad_image) : text_key;
    std::uint64_t noise_state = hash_combine(req.seed, std::bit_cast<std::uint64_t>(w));
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
      const double t = static_cast<double>(splitmix64(text_key + i) & 0xff);
      const double c = static_cast<double>(splitmix64(cad_key + i) & 0xff);
      noise_state = splitmix64(noise_state);
      const double jitter = static_cast<double>(noise_state & 0x1f) - 16.0;
      const double v = (1.0 - w) * t + w * c + jitter;
      image.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return png::encode(image, {{kEmbeddingTextKey, encode_embedding_hex(z)},
                               {"cadprompt-seed", std::to_string(req.seed)},
                               {"cadprompt-weight", format_weight(w)}});
  }

 private:
  static double effective_weight(const GenerationRequest& req) {
    return (req.cad_image && req.weight) ? *req.weight : 0.0;
  }

  const Embedder& embedder_;
  double noise_magnitude_;
};

/// Posts multipart/form-data to `{base}/generate` with fields text, seed,
/// params (json), and when image prompting: weight and the file cad_image.
/// A 200 response body is taken as the image bytes.
class HttpBackend final : public GenerationBackend {
 public:
  explicit HttpBackend(std::string url, std::chrono::seconds timeout = std::chrono::seconds(300))
      : timeout_(timeout) {
    std::tie(origin_, prefix_) = http::split_url(url);
  }

  Bytes generate(const GenerationRequest& req) override {
    httplib::MultipartFormDataItems items = {
        {"text", req.text, "", "text/plain"},
        {"seed", std::to_string(req.seed), "", "text/plain"},
        {"params", params_to_json(req.params).dump(), "", "application/json"},
    };
    if (req.cad_image && req.weight) {
      items.push_back({"weight", format_weight(*req.weight), "", "text/plain"});
      items.push_back({"cad_image",
                       std::string(reinterpret_cast<const char*>(req.cad_image->data()), req.cad_image->size()),
                       "cad_image.png", "application/octet-stream"});
    }
    auto client = http::make_client(origin_, timeout_);
    auto res = client.Post(prefix_ + "/generate", items);
    if (!res || res->status != 200) {
      throw Error(Errc::backend, "generation request failed: " + http::describe(res));
    }
    return Bytes(res->body.begin(), res->body.end());
  }

 private:
  std::string origin_;
  std::string prefix_;
  std::chrono::seconds timeout_;
};

/// "mock" (optionally "mock:NOISE") or an http(s) URL.
inline std::unique_ptr<GenerationBackend> make_backend(const std::string& spec, const Embedder& embedder) {
  if (http::is_http_url(spec)) return std::make_unique<HttpBackend>(spec);
  if (spec == "mock") return std::make_unique<MockBackend>(embedder);
  if (spec.rfind("mock:", 0) == 0) {
    try {
      return std::make_unique<MockBackend>(embedder, std::stod(spec.substr(5)));
    } catch (const std::logic_error&) {
      throw Error(Errc::invalid_argument, "bad backend spec: " + spec);
    }
  }
  throw Error(Errc::invalid_argument, "unknown backend: " + spec);
}

}  // namespace cadprompt
