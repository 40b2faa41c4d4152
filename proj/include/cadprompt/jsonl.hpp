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

// Durable JSON-lines files: one record per line, appended with O_APPEND and
// fdatasync before the append call returns.

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "cadprompt/corpus.hpp"
#include "cadprompt/error.hpp"

namespace cadprompt {

class JsonlAppender {
 public:
  explicit JsonlAppender(const fs::path& path, bool durable = true) : path_(path), durable_(durable) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::io, "cannot open '" + path.string() + "': " + std::strerror(errno));
  }
  JsonlAppender(const JsonlAppender&) = delete;
  JsonlAppender& operator=(const JsonlAppender&) = delete;
  ~JsonlAppender() {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const nlohmann::json& record) {
    std::string line = record.dump();
    line.push_back('\n');
    std::lock_guard lock(mutex_);
    const char* data = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      const auto n = ::write(fd_, data, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::io, "append to '" + path_.string() + "' failed: " + std::strerror(errno));
      }
      data += n;
      left -= static_cast<std::size_t>(n);
    }
    if (durable_ && ::fdatasync(fd_) != 0) {
      throw Error(Errc::io, "fdatasync of '" + path_.string() + "' failed: " + std::strerror(errno));
    }
  }

  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
  bool durable_;
  int fd_ = -1;
  std::mutex mutex_;
};

/// Reads every complete record. A trailing line without its newline is an
/// interrupted append; it is dropped and, with `repair`, truncated away.
/// Any other unparsable line is corruption.
inline std::vector<nlohmann::json> read_jsonl(const fs::path& path, bool repair = false) {
  std::vector<nlohmann::json> records;
  if (!fs::exists(path)) return records;
  const auto text = read_file_text(path);
  std::size_t at = 0;
  std::size_t line_no = 0;
  while (at < text.size()) {
    const auto nl = text.find('\n', at);
    ++line_no;
    if (nl == std::string::npos) {
      if (repair) fs::resize_file(path, at);
      break;
    }
    const std::string_view line(text.data() + at, nl - at);
    if (!line.empty()) {
      try {
        records.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::corrupt, "'" + path.string() + "' line " + std::to_string(line_no) +
                                       " is not valid json: " + e.what());
      }
    }
    at = nl + 1;
  }
  return records;
}

}  // namespace cadprompt
