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

// Minimal PNG encoding for placeholder artifacts: 8-bit RGB, filter 0,
// optional tEXt chunks. Decoding only walks chunks to recover tEXt entries.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cadprompt/error.hpp"

namespace cadprompt::png {

inline constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  return (std::uint32_t{in[at]} << 24) | (std::uint32_t{in[at + 1]} << 16) |
         (std::uint32_t{in[at + 2]} << 8) | std::uint32_t{in[at + 3]};
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5],
                      std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = ::crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

struct RgbImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

inline std::vector<std::uint8_t> encode(const RgbImage& image,
                                        const std::map<std::string, std::string>& text = {}) {
  if (image.pixels.size() != std::size_t{image.width} * image.height * 3) {
    throw Error(Errc::invalid_argument, "pixel buffer does not match image size");
  }
  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());

  std::vector<std::uint8_t> ihdr;
  detail::put_u32(ihdr, image.width);
  detail::put_u32(ihdr, image.height);
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  detail::put_chunk(out, "IHDR", ihdr);

  for (const auto& [key, value] : text) {
    std::vector<std::uint8_t> payload(key.begin(), key.end());
    payload.push_back(0);
    payload.insert(payload.end(), value.begin(), value.end());
    detail::put_chunk(out, "tEXt", payload);
  }

  std::vector<std::uint8_t> raw;
  raw.reserve((std::size_t{image.width} * 3 + 1) * image.height);
  for (std::uint32_t y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const auto* row = image.pixels.data() + std::size_t{y} * image.width * 3;
    raw.insert(raw.end(), row, row + std::size_t{image.width} * 3);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error(Errc::io, "zlib compression failed");
  }
  packed.resize(packed_size);
  detail::put_chunk(out, "IDAT", packed);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline bool has_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kSignature.size() &&
         std::memcmp(bytes.data(), kSignature.data(), kSignature.size()) == 0;
}

/// tEXt entries of a PNG stream. Non-PNG input yields an empty map; a PNG
/// with a broken chunk table is rejected.
inline std::map<std::string, std::string> read_text_chunks(std::span<const std::uint8_t> bytes) {
  std::map<std::string, std::string> text;
  if (!has_signature(bytes)) return text;
  std::size_t at = kSignature.size();
  while (at + 12 <= bytes.size()) {
    const std::uint32_t length = detail::get_u32(bytes, at);
    if (at + 12 + std::size_t{length} > bytes.size()) {
      throw Error(Errc::corrupt, "png chunk overruns stream at offset " + std::to_string(at));
    }
    const std::string type(reinterpret_cast<const char*>(bytes.data() + at + 4), 4);
    const auto* data = bytes.data() + at + 8;
    const auto crc = ::crc32(0L, bytes.data() + at + 4, static_cast<uInt>(4 + length));
    if (crc != detail::get_u32(bytes, at + 8 + length)) {
      throw Error(Errc::corrupt, "png crc mismatch in " + type + " chunk");
    }
    if (type == "tEXt") {
      const auto* end = data + length;
      const auto* sep = std::find(data, end, std::uint8_t{0});
      if (sep != end) {
        text.emplace(std::string(data, sep), std::string(sep + 1, end));
      }
    } else if (type == "IEND") {
      break;
    }
    at += 12 + std::size_t{length};
  }
  return text;
}

}  // namespace cadprompt::png
