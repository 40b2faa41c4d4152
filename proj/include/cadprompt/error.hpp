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

#include <stdexcept>
#include <string>

namespace cadprompt {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  duplicate,
  not_found,
  io,
  corrupt,
  version_mismatch,
  embedder_mismatch,
  backend,
  out_of_order,
  out_of_range,
  infeasible,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::duplicate: return "duplicate";
    case Errc::not_found: return "not_found";
    case Errc::io: return "io";
    case Errc::corrupt: return "corrupt";
    case Errc::version_mismatch: return "version_mismatch";
    case Errc::embedder_mismatch: return "embedder_mismatch";
    case Errc::backend: return "backend";
    case Errc::out_of_order: return "out_of_order";
    case Errc::out_of_range: return "out_of_range";
    case Errc::infeasible: return "infeasible";
  }
  return "unknown";
}

/// Every rejection raised by the library. The code drives CLI exit status and
/// HTTP status mapping; the message is meant for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cadprompt
