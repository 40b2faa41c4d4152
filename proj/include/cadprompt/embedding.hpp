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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cadprompt/error.hpp"

namespace cadprompt {

/// Dense embedding with finite entries. Unit length is not enforced by the
/// type; stores and artifacts hold normalized vectors produced by
/// `normalized()`.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw Error(Errc::invalid_argument,
                    "embedding entry " + std::to_string(i) + " is not finite");
      }
    }
  }

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const {
    double sum = 0.0;
    for (double v : values_) sum += v * v;
    return std::sqrt(sum);
  }

  bool is_unit(double tol = 1e-6) const { return std::abs(norm() - 1.0) <= tol; }

  EmbeddingVector normalized() const {
    const double n = norm();
    if (!(n > 0.0)) {
      throw Error(Errc::invalid_argument, "cannot normalize a zero-norm embedding");
    }
    std::vector<double> out(values_.size());
    std::transform(values_.begin(), values_.end(), out.begin(),
                   [n](double v) { return v / n; });
    return EmbeddingVector(std::move(out));
  }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::dimension_mismatch, "dimension mismatch: " + std::to_string(a.size()) +
                                              " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

/// Cosine similarity, clamped to [-1, 1]. Rejects mismatched dimensions,
/// non-finite entries and zero-norm inputs.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::dimension_mismatch, "dimension mismatch: " + std::to_string(a.size()) +
                                              " vs " + std::to_string(b.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (!std::isfinite(ab) || !std::isfinite(aa) || !std::isfinite(bb)) {
    throw Error(Errc::invalid_argument, "cosine of non-finite vector");
  }
  if (aa == 0.0 || bb == 0.0) {
    throw Error(Errc::invalid_argument, "cosine of zero-norm vector");
  }
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(a.values(), b.values());
}

}  // namespace cadprompt
