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

#include <chrono>
#include <string>
#include <utility>

#include "cadprompt/error.hpp"

namespace cadprompt::http {

/// "http://host:port/prefix" -> {"http://host:port", "/prefix"}.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::invalid_argument, "not an http url: " + url);
  }
  const auto path_at = url.find('/', scheme_end + 3);
  if (path_at == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_at);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_at), prefix};
}

inline bool is_http_url(const std::string& s) {
  return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

inline httplib::Client make_client(const std::string& origin, std::chrono::seconds timeout) {
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

inline std::string describe(const httplib::Result& result) {
  if (!result) return "transport error: " + httplib::to_string(result.error());
  return "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200);
}

}  // namespace cadprompt::http
