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

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cadprompt/embedder.hpp"
#include "cadprompt/embedding.hpp"
#include "cadprompt/error.hpp"

namespace cadprompt {

namespace fs = std::filesystem;
using Metadata = std::map<std::string, std::string>;

inline constexpr const char* kCorpusVersion = "corpus/1";

struct CorpusEntry {
  std::string image_id;
  std::string uri;
  EmbeddingVector embedding;
  Metadata metadata;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

/// The retrieval pool. Immutable once constructed; every entry shares `dim`,
/// ids are unique and embeddings are unit length.
class CorpusStore {
 public:
  CorpusStore(std::size_t dim, std::string embedder_id, std::vector<CorpusEntry> entries)
      : dim_(dim), embedder_id_(std::move(embedder_id)), entries_(std::move(entries)) {
    if (dim_ == 0) throw Error(Errc::invalid_argument, "corpus dimension must be positive");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.embedding.dim() != dim_) {
        throw Error(Errc::dimension_mismatch,
                    "entry '" + e.image_id + "' has dimension " + std::to_string(e.embedding.dim()) +
                        ", corpus dimension is " + std::to_string(dim_));
      }
      if (!e.embedding.is_unit(1e-6)) {
        throw Error(Errc::invalid_argument, "entry '" + e.image_id + "' is not unit length");
      }
      if (!index_.emplace(e.image_id, i).second) {
        throw Error(Errc::duplicate, "duplicate image_id '" + e.image_id + "'");
      }
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::string& embedder_id() const noexcept { return embedder_id_; }
  const std::vector<CorpusEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  const CorpusEntry* find(const std::string& image_id) const {
    auto it = index_.find(image_id);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  friend bool operator==(const CorpusStore& a, const CorpusStore& b) {
    return a.dim_ == b.dim_ && a.embedder_id_ == b.embedder_id_ && a.entries_ == b.entries_;
  }

 private:
  std::size_t dim_;
  std::string embedder_id_;
  std::vector<CorpusEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ManifestImage {
  std::string image_id;
  std::string uri;
  Metadata metadata;
};

inline Bytes read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read '" + path.string() + "'");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io, "cannot read '" + path.string() + "'");
  return bytes;
}

inline std::string read_file_text(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::io, "cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline nlohmann::json parse_json_file(const fs::path& path) {
  const auto text = read_file_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::corrupt, "'" + path.string() + "' is not valid json: " + e.what());
  }
}

/// Corpus manifest `{images:[{image_id, uri, metadata}]}`. Relative uris are
/// resolved against `base_dir` and stored absolute.
inline std::vector<ManifestImage> parse_manifest(const nlohmann::json& doc, const fs::path& base_dir) {
  std::vector<ManifestImage> images;
  try {
    for (const auto& item : doc.at("images")) {
      ManifestImage img;
      img.image_id = item.at("image_id").get<std::string>();
      fs::path uri = item.at("uri").get<std::string>();
      if (uri.is_relative()) uri = fs::absolute(base_dir / uri);
      img.uri = uri.lexically_normal().string();
      if (item.contains("metadata")) img.metadata = item.at("metadata").get<Metadata>();
      images.push_back(std::move(img));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed corpus manifest: ") + e.what());
  }
  return images;
}

inline CorpusStore ingest_corpus(const std::vector<ManifestImage>& images, const Embedder& embedder) {
  if (images.empty()) throw Error(Errc::invalid_argument, "corpus manifest lists no images");
  if (embedder.dim() == 0) throw Error(Errc::invalid_argument, "embedder dimension must be positive");
  std::set<std::string> seen;
  for (const auto& img : images) {
    if (!seen.insert(img.image_id).second) {
      throw Error(Errc::duplicate, "duplicate image_id '" + img.image_id + "' in manifest");
    }
  }
  std::vector<CorpusEntry> entries;
  entries.reserve(images.size());
  for (const auto& img : images) {
    Bytes bytes;
    try {
      bytes = read_file_bytes(img.uri);
    } catch (const Error&) {
      throw Error(Errc::io, "unreadable image at uri '" + img.uri + "'");
    }
    auto embedding = embedder.embed_image(bytes);
    if (embedding.dim() != embedder.dim()) {
      throw Error(Errc::dimension_mismatch, "embedding of '" + img.image_id + "' has dimension " +
                                                std::to_string(embedding.dim()) + ", embedder reports " +
                                                std::to_string(embedder.dim()));
    }
    entries.push_back({img.image_id, img.uri, embedding.normalized(), img.metadata});
  }
  return CorpusStore(embedder.dim(), embedder.id(), std::move(entries));
}

inline CorpusStore ingest_corpus(const fs::path& manifest_path, const Embedder& embedder) {
  const auto doc = parse_json_file(manifest_path);
  return ingest_corpus(parse_manifest(doc, manifest_path.parent_path()), embedder);
}

inline nlohmann::json corpus_to_json(const CorpusStore& store) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : store.entries()) {
    entries.push_back({{"image_id", e.image_id},
                       {"uri", e.uri},
                       {"embedding", std::vector<double>(e.embedding.values().begin(),
                                                         e.embedding.values().end())},
                       {"metadata", e.metadata}});
  }
  return {{"version", kCorpusVersion},
          {"dim", store.dim()},
          {"embedder_id", store.embedder_id()},
          {"entries", std::move(entries)}};
}

namespace detail {

// Structural SAX pass used only after a parse failure, to report which
// entries[] record the stream broke inside.
class EntryLocator : public nlohmann::json_sax<nlohmann::json> {
 public:
  std::size_t completed = 0;
  bool failed_in_entries = false;

  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_object(std::size_t) override { return push(); }
  bool end_object() override { return pop(); }
  bool start_array(std::size_t) override {
    if (depth_ == 1 && key_ == "entries") entries_depth_ = depth_ + 1;
    return push();
  }
  bool end_array() override {
    if (depth_ == entries_depth_) entries_depth_ = 0;
    return pop();
  }
  bool key(string_t& k) override {
    if (depth_ == 1) key_ = k;
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override {
    failed_in_entries = entries_depth_ != 0;
    return false;
  }

 private:
  bool push() {
    ++depth_;
    return true;
  }
  bool pop() {
    --depth_;
    if (entries_depth_ != 0 && depth_ == entries_depth_) ++completed;
    return true;
  }

  int depth_ = 0;
  int entries_depth_ = 0;
  std::string key_;
};

}  // namespace detail

inline CorpusStore corpus_from_json(const nlohmann::json& doc) {
  std::size_t dim = 0;
  std::string embedder_id;
  try {
    const auto version = doc.at("version").get<std::string>();
    if (version != kCorpusVersion) {
      throw Error(Errc::version_mismatch,
                  "corpus version '" + version + "' is not '" + kCorpusVersion + "'");
    }
    dim = doc.at("dim").get<std::size_t>();
    embedder_id = doc.at("embedder_id").get<std::string>();
    doc.at("entries").get_ref<const nlohmann::json::array_t&>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed corpus header: ") + e.what());
  }
  std::vector<CorpusEntry> entries;
  const auto& records = doc.at("entries");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    try {
      CorpusEntry e;
      e.image_id = r.at("image_id").get<std::string>();
      e.uri = r.at("uri").get<std::string>();
      e.embedding = EmbeddingVector(r.at("embedding").get<std::vector<double>>());
      if (r.contains("metadata")) e.metadata = r.at("metadata").get<Metadata>();
      if (e.embedding.dim() != dim) {
        throw Error(Errc::corrupt, "embedding has dimension " + std::to_string(e.embedding.dim()) +
                                       ", expected " + std::to_string(dim));
      }
      if (!e.embedding.is_unit(1e-6)) throw Error(Errc::corrupt, "embedding is not unit length");
      entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::corrupt, "corrupted record at index " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(Errc::corrupt, "corrupted record at index " + std::to_string(i) + ": " + e.what());
    }
  }
  return CorpusStore(dim, std::move(embedder_id), std::move(entries));
}

inline void save_corpus(const CorpusStore& store, const fs::path& path) {
  write_file_atomic(path, corpus_to_json(store).dump(1) + "\n");
}

inline CorpusStore load_corpus(const fs::path& path) {
  const auto text = read_file_text(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    detail::EntryLocator locator;
    nlohmann::json::sax_parse(text, &locator);
    if (locator.failed_in_entries) {
      throw Error(Errc::corrupt, "corrupted record at index " + std::to_string(locator.completed) +
                                     " in '" + path.string() + "'");
    }
    throw Error(Errc::corrupt, "'" + path.string() + "' is not valid json: " + e.what());
  }
  return corpus_from_json(doc);
}

}  // namespace cadprompt
