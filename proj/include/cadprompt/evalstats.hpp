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

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cadprompt/error.hpp"
#include "cadprompt/execute.hpp"
#include "cadprompt/genplan.hpp"
#include "cadprompt/jsonl.hpp"

namespace cadprompt {

// ---------------------------------------------------------------------------
// Ratings
// ---------------------------------------------------------------------------

inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 7;

struct RatingRecord {
  std::string rater_id;
  std::string artifact_id;
  int feasibility = 0;
  int novelty = 0;
  std::int64_t elapsed_ms = 0;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

enum class Dimension { feasibility, novelty };

inline Dimension parse_dimension(const std::string& s) {
  if (s == "feasibility") return Dimension::feasibility;
  if (s == "novelty") return Dimension::novelty;
  throw Error(Errc::invalid_argument, "dimension must be feasibility or novelty, got '" + s + "'");
}

inline const char* dimension_name(Dimension d) {
  return d == Dimension::feasibility ? "feasibility" : "novelty";
}

inline void validate_rating(const RatingRecord& r) {
  if (r.rater_id.empty() || r.artifact_id.empty()) {
    throw Error(Errc::invalid_argument, "rating needs rater_id and artifact_id");
  }
  for (auto [name, score] : {std::pair{"feasibility", r.feasibility}, std::pair{"novelty", r.novelty}}) {
    if (score < kLikertMin || score > kLikertMax) {
      throw Error(Errc::out_of_range, std::string(name) + " score " + std::to_string(score) +
                                          " is outside 1..7");
    }
  }
  if (r.elapsed_ms < 0) throw Error(Errc::out_of_range, "elapsed_ms must be nonnegative");
}

inline nlohmann::json rating_to_json(const RatingRecord& r) {
  return {{"rater_id", r.rater_id},       {"artifact_id", r.artifact_id}, {"feasibility", r.feasibility},
          {"novelty", r.novelty},         {"elapsed_ms", r.elapsed_ms}};
}

inline RatingRecord rating_from_json(const nlohmann::json& j) {
  RatingRecord r;
  try {
    r.rater_id = j.at("rater_id").get<std::string>();
    r.artifact_id = j.at("artifact_id").get<std::string>();
    r.feasibility = j.at("feasibility").get<int>();
    r.novelty = j.at("novelty").get<int>();
    r.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed rating record: ") + e.what());
  }
  validate_rating(r);
  return r;
}

/// Ratings file (JSON-lines). Duplicate (rater_id, artifact_id) pairs are
/// rejected.
inline std::vector<RatingRecord> load_ratings(const fs::path& path) {
  if (!fs::exists(path)) throw Error(Errc::not_found, "no ratings file at '" + path.string() + "'");
  std::vector<RatingRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& j : read_jsonl(path)) {
    auto r = rating_from_json(j);
    if (!seen.emplace(r.rater_id, r.artifact_id).second) {
      throw Error(Errc::duplicate, "duplicate rating of '" + r.artifact_id + "' by '" + r.rater_id + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct ImageMeans {
  double feasibility = 0.0;
  double novelty = 0.0;
  std::size_t n = 0;

  double get(Dimension d) const { return d == Dimension::feasibility ? feasibility : novelty; }
};

inline std::map<std::string, ImageMeans> mean_ratings(const std::vector<RatingRecord>& ratings) {
  std::map<std::string, std::tuple<double, double, std::size_t>> sums;
  for (const auto& r : ratings) {
    auto& [f, nv, n] = sums[r.artifact_id];
    f += r.feasibility;
    nv += r.novelty;
    ++n;
  }
  std::map<std::string, ImageMeans> out;
  for (const auto& [id, s] : sums) {
    const auto& [f, nv, n] = s;
    out[id] = {f / static_cast<double>(n), nv / static_cast<double>(n), n};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Balanced rater assignment
// ---------------------------------------------------------------------------

struct AssignmentParams {
  std::size_t n_images = 0;
  std::size_t n_raters = 0;
  std::size_t per_rater_count = 0;
  std::size_t per_image_count = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const AssignmentParams&, const AssignmentParams&) = default;
};

struct AssignmentPlan {
  AssignmentParams params;
  std::vector<std::string> rater_ids;                          // presentation order of raters
  std::map<std::string, std::vector<std::string>> per_rater;   // rater -> artifacts in rating order

  friend bool operator==(const AssignmentPlan&, const AssignmentPlan&) = default;
};

inline void check_assignment_params(const AssignmentParams& p) {
  if (p.n_images == 0 || p.n_raters == 0 || p.per_rater_count == 0 || p.per_image_count == 0) {
    throw Error(Errc::infeasible, "assignment parameters must all be positive");
  }
  if (p.n_images * p.per_image_count != p.n_raters * p.per_rater_count) {
    throw Error(Errc::infeasible, "n_images x per_image_count != n_raters x per_rater_count (" +
                                      std::to_string(p.n_images) + " x " + std::to_string(p.per_image_count) +
                                      " = " + std::to_string(p.n_images * p.per_image_count) + ", " +
                                      std::to_string(p.n_raters) + " x " + std::to_string(p.per_rater_count) +
                                      " = " + std::to_string(p.n_raters * p.per_rater_count) + ")");
  }
  if (p.per_image_count > p.n_raters) {
    throw Error(Errc::infeasible, "per_image_count (" + std::to_string(p.per_image_count) +
                                      ") > n_raters (" + std::to_string(p.n_raters) + ")");
  }
  if (p.per_rater_count > p.n_images) {
    throw Error(Errc::infeasible, "per_rater_count (" + std::to_string(p.per_rater_count) +
                                      ") > n_images (" + std::to_string(p.n_images) + ")");
  }
}

inline std::string padded_id(const std::string& prefix, std::size_t index, std::size_t count) {
  const auto width = std::to_string(count).size();
  auto digits = std::to_string(index);
  return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

/// Greedy dealing: each rater in turn takes the per_rater_count images with
/// the most remaining required ratings, ties broken at random; the rater's
/// list is then shuffled into presentation order. Taking the largest
/// remaining multiplicities row by row always completes when the identity and
/// per_image_count <= n_raters hold.
inline AssignmentPlan build_assignment(const std::vector<std::string>& artifact_ids, std::size_t n_raters,
                                       std::size_t per_rater_count, std::size_t per_image_count,
                                       std::uint64_t seed) {
  AssignmentParams params{artifact_ids.size(), n_raters, per_rater_count, per_image_count, seed};
  check_assignment_params(params);
  if (std::set(artifact_ids.begin(), artifact_ids.end()).size() != artifact_ids.size()) {
    throw Error(Errc::duplicate, "artifact ids passed to the assignment are not unique");
  }

  std::mt19937_64 rng(seed);
  const std::size_t n = artifact_ids.size();
  std::vector<std::size_t> remaining(n, per_image_count);
  std::vector<std::uint64_t> tiebreak(n);
  std::vector<std::size_t> order(n);

  AssignmentPlan plan;
  plan.params = params;
  for (std::size_t r = 0; r < n_raters; ++r) {
    const auto rater = padded_id("r", r + 1, n_raters);
    for (auto& t : tiebreak) t = rng();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(per_rater_count), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (remaining[a] != remaining[b]) return remaining[a] > remaining[b];
                        return tiebreak[a] < tiebreak[b];
                      });
    std::vector<std::string> list;
    list.reserve(per_rater_count);
    for (std::size_t k = 0; k < per_rater_count; ++k) {
      const auto img = order[k];
      if (remaining[img] == 0) {
        throw Error(Errc::infeasible, "greedy dealing ran out of images for rater " + rater);
      }
      --remaining[img];
      list.push_back(artifact_ids[img]);
    }
    std::shuffle(list.begin(), list.end(), rng);
    plan.rater_ids.push_back(rater);
    plan.per_rater.emplace(rater, std::move(list));
  }
  return plan;
}

inline AssignmentPlan build_assignment(std::size_t n_images, std::size_t n_raters, std::size_t per_rater_count,
                                       std::size_t per_image_count, std::uint64_t seed) {
  check_assignment_params({n_images, n_raters, per_rater_count, per_image_count, seed});
  std::vector<std::string> ids;
  ids.reserve(n_images);
  for (std::size_t i = 0; i < n_images; ++i) ids.push_back(padded_id("img", i + 1, n_images));
  return build_assignment(ids, n_raters, per_rater_count, per_image_count, seed);
}

/// Checks every AssignmentPlan invariant; returns a description of the first
/// violation, or nullopt.
inline std::optional<std::string> assignment_violation(const AssignmentPlan& plan) {
  const auto& p = plan.params;
  if (p.n_images * p.per_image_count != p.n_raters * p.per_rater_count) return "feasibility identity broken";
  if (plan.per_rater.size() != p.n_raters || plan.rater_ids.size() != p.n_raters) return "wrong rater count";
  std::map<std::string, std::size_t> per_image;
  for (const auto& [rater, list] : plan.per_rater) {
    if (list.size() != p.per_rater_count) return "rater " + rater + " has " + std::to_string(list.size()) + " images";
    if (std::set(list.begin(), list.end()).size() != list.size()) return "rater " + rater + " has repeats";
    for (const auto& id : list) ++per_image[id];
  }
  if (per_image.size() != p.n_images) return "only " + std::to_string(per_image.size()) + " images assigned";
  for (const auto& [id, count] : per_image) {
    if (count != p.per_image_count) return "image " + id + " assigned " + std::to_string(count) + " times";
  }
  return std::nullopt;
}

inline nlohmann::json assignment_to_json(const AssignmentPlan& plan) {
  nlohmann::json raters = nlohmann::json::array();
  for (const auto& id : plan.rater_ids) raters.push_back({{"rater_id", id}, {"artifacts", plan.per_rater.at(id)}});
  const auto& p = plan.params;
  return {{"version", "assignment/1"},
          {"params",
           {{"n_images", p.n_images},
            {"n_raters", p.n_raters},
            {"per_rater_count", p.per_rater_count},
            {"per_image_count", p.per_image_count},
            {"seed", p.seed}}},
          {"raters", raters}};
}

inline AssignmentPlan assignment_from_json(const nlohmann::json& j) {
  AssignmentPlan plan;
  try {
    if (j.at("version").get<std::string>() != "assignment/1") {
      throw Error(Errc::version_mismatch, "assignment version is not 'assignment/1'");
    }
    const auto& p = j.at("params");
    plan.params = {p.at("n_images").get<std::size_t>(), p.at("n_raters").get<std::size_t>(),
                   p.at("per_rater_count").get<std::size_t>(), p.at("per_image_count").get<std::size_t>(),
                   p.at("seed").get<std::uint64_t>()};
    for (const auto& r : j.at("raters")) {
      const auto id = r.at("rater_id").get<std::string>();
      plan.rater_ids.push_back(id);
      if (!plan.per_rater.emplace(id, r.at("artifacts").get<std::vector<std::string>>()).second) {
        throw Error(Errc::duplicate, "duplicate rater '" + id + "' in assignment");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt, std::string("malformed assignment: ") + e.what());
  }
  if (auto bad = assignment_violation(plan)) throw Error(Errc::corrupt, "invalid assignment: " + *bad);
  return plan;
}

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

/// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i + 1;
    while (j < idx.size() && values[idx[j]] == values[idx[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = avg;
    i = j;
  }
  return ranks;
}

/// Sum of t^3 - t over tie groups.
inline double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

inline double normal_two_tailed(double z) { return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0); }

enum class MwMethod { exact, normal_approx };

struct MannWhitneyResult {
  double u = 0.0;  // U of sample a
  double z = 0.0;  // negative when a ranks below b
  double p_two_tailed = 1.0;
  MwMethod method = MwMethod::normal_approx;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  // Exact method only: p = p_count / p_total labelings.
  std::uint64_t p_count = 0;
  std::uint64_t p_total = 0;
};

inline constexpr std::size_t kExactMaxTotal = 16;

inline std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Null distribution of U for tie-free samples: counts[u] = number of
/// size-n_a subsets of ranks 1..n_a+n_b whose U equals u.
inline std::vector<std::uint64_t> exact_u_counts(std::size_t n_a, std::size_t n_b) {
  const std::size_t n = n_a + n_b;
  const std::size_t max_sum = n * (n + 1) / 2;
  // ways[k][s]: subsets of size k of the ranks seen so far with rank sum s.
  std::vector<std::vector<std::uint64_t>> ways(n_a + 1, std::vector<std::uint64_t>(max_sum + 1, 0));
  ways[0][0] = 1;
  for (std::size_t rank = 1; rank <= n; ++rank) {
    for (std::size_t k = std::min(rank, n_a); k >= 1; --k) {
      for (std::size_t s = max_sum; s >= rank; --s) ways[k][s] += ways[k - 1][s - rank];
    }
  }
  const std::size_t offset = n_a * (n_a + 1) / 2;
  std::vector<std::uint64_t> counts(n_a * n_b + 1, 0);
  for (std::size_t u = 0; u < counts.size(); ++u) counts[u] = ways[n_a][u + offset];
  return counts;
}

/// Two-sided Mann-Whitney U test. Exact when the pooled size is at most 16
/// and there are no ties; otherwise the normal approximation with tie-corrected
/// variance and no continuity correction.
inline MannWhitneyResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(Errc::invalid_argument, "mann_whitney needs two nonempty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw Error(Errc::invalid_argument, "mann_whitney sample is not finite");
  }
  const auto ranks = average_ranks(pooled);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double n = na + nb;
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rank_sum_a += ranks[i];

  MannWhitneyResult res;
  res.n_a = a.size();
  res.n_b = b.size();
  res.u = rank_sum_a - na * (na + 1.0) / 2.0;
  const double mu = na * nb / 2.0;
  const double ties = tie_term(pooled);
  const double var = n > 1.0 ? na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0))) : 0.0;
  res.z = var > 0.0 ? (res.u - mu) / std::sqrt(var) : 0.0;

  if (pooled.size() <= kExactMaxTotal && ties == 0.0) {
    res.method = MwMethod::exact;
    const auto counts = exact_u_counts(a.size(), b.size());
    // Integer comparison of |2U - n_a n_b|, U is integral without ties.
    const auto nanb = static_cast<long long>(a.size() * b.size());
    const auto observed = std::llabs(2 * std::llround(res.u) - nanb);
    for (std::size_t u = 0; u < counts.size(); ++u) {
      if (std::llabs(2 * static_cast<long long>(u) - nanb) >= observed) res.p_count += counts[u];
    }
    res.p_total = binomial(pooled.size(), a.size());
    res.p_two_tailed = static_cast<double>(res.p_count) / static_cast<double>(res.p_total);
  } else {
    res.method = MwMethod::normal_approx;
    res.p_two_tailed = var > 0.0 ? normal_two_tailed(res.z) : 1.0;
  }
  return res;
}

inline nlohmann::json mann_whitney_to_json(const MannWhitneyResult& r) {
  nlohmann::json j = {{"u", r.u},
                      {"z", r.z},
                      {"p_two_tailed", r.p_two_tailed},
                      {"method", r.method == MwMethod::exact ? "exact" : "normal_approx"},
                      {"n_a", r.n_a},
                      {"n_b", r.n_b},
                      {"continuity_correction", false},
                      {"tie_correction", true}};
  if (r.method == MwMethod::exact) j["p_rational"] = {r.p_count, r.p_total};
  return j;
}

struct SpearmanResult {
  double rho = 0.0;
  double p_two_tailed = 1.0;
  std::size_t n = 0;
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman's rho as the Pearson correlation of average ranks; p from the
/// t approximation with n - 2 degrees of freedom.
inline SpearmanResult spearman(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 3) throw Error(Errc::invalid_argument, "spearman needs at least 3 pairs");
  std::vector<double> x, y;
  x.reserve(pairs.size());
  y.reserve(pairs.size());
  for (const auto& [px, py] : pairs) {
    if (!std::isfinite(px) || !std::isfinite(py)) throw Error(Errc::invalid_argument, "spearman input is not finite");
    x.push_back(px);
    y.push_back(py);
  }
  const auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) {
    throw Error(Errc::invalid_argument, "spearman is undefined for a constant coordinate");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  SpearmanResult res;
  res.n = pairs.size();
  res.rho = pearson(rx, ry);
  if (std::abs(res.rho) >= 1.0) {
    res.p_two_tailed = 0.0;
  } else if (res.n > 2) {
    const double df = static_cast<double>(res.n - 2);
    const double t = res.rho * std::sqrt(df / (1.0 - res.rho * res.rho));
    boost::math::students_t dist(df);
    res.p_two_tailed = std::clamp(2.0 * boost::math::cdf(dist, -std::abs(t)), 0.0, 1.0);
  }
  return res;
}

inline nlohmann::json spearman_to_json(const SpearmanResult& r) {
  return {{"rho", r.rho}, {"p_two_tailed", r.p_two_tailed}, {"n", r.n}};
}

// ---------------------------------------------------------------------------
// Setting-level analyses over per-image means
// ---------------------------------------------------------------------------

struct ArtifactSetting {
  std::string label;
  Variant variant = Variant::base;
  std::optional<double> weight;
};

using SettingMap = std::map<std::string, ArtifactSetting>;  // artifact_id -> setting

inline SettingMap setting_map_from(const std::vector<GeneratedArtifact>& artifacts) {
  SettingMap out;
  for (const auto& a : artifacts) out[a.artifact_id] = {a.setting_label, a.variant, a.weight};
  return out;
}

/// Per-image means of one setting, ordered by artifact id.
inline std::vector<double> setting_sample(const std::map<std::string, ImageMeans>& means,
                                          const SettingMap& settings, const std::string& label, Dimension d) {
  std::vector<double> out;
  for (const auto& [id, m] : means) {
    auto it = settings.find(id);
    if (it != settings.end() && it->second.label == label) out.push_back(m.get(d));
  }
  if (out.empty()) throw Error(Errc::not_found, "no rated images for setting '" + label + "'");
  return out;
}

inline MannWhitneyResult compare_settings(const std::map<std::string, ImageMeans>& means,
                                          const SettingMap& settings, const std::string& label_a,
                                          const std::string& label_b, Dimension d) {
  const auto a = setting_sample(means, settings, label_a, d);
  const auto b = setting_sample(means, settings, label_b, d);
  return mann_whitney(a, b);
}

/// Spearman between image-prompt weight and a rating dimension. The enhanced
/// base setting stands in for weight 0; un-enhanced base images are excluded.
inline SpearmanResult weight_correlation(const std::map<std::string, ImageMeans>& means,
                                         const SettingMap& settings, Dimension d) {
  std::set<std::string> required;
  for (const auto& [id, s] : settings) {
    if (s.variant != Variant::base) required.insert(s.label);
  }
  std::set<std::string> present;
  std::vector<std::pair<double, double>> pairs;
  for (const auto& [id, m] : means) {
    auto it = settings.find(id);
    if (it == settings.end() || it->second.variant == Variant::base) continue;
    const double w = it->second.variant == Variant::cip ? it->second.weight.value_or(0.0) : 0.0;
    pairs.emplace_back(w, m.get(d));
    present.insert(it->second.label);
  }
  for (const auto& label : required) {
    if (!present.contains(label)) throw Error(Errc::not_found, "no rated images for setting '" + label + "'");
  }
  return spearman(pairs);
}

inline SpearmanResult tradeoff_correlation(const std::map<std::string, ImageMeans>& means) {
  if (means.size() < 3) throw Error(Errc::invalid_argument, "tradeoff needs at least 3 rated images");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(means.size());
  for (const auto& [id, m] : means) pairs.emplace_back(m.feasibility, m.novelty);
  return spearman(pairs);
}

// ---------------------------------------------------------------------------
// Rater quality
// ---------------------------------------------------------------------------

struct RaterTiming {
  std::string rater_id;
  std::vector<std::int64_t> elapsed_ms;
};

inline std::vector<RaterTiming> timings_from_ratings(const std::vector<RatingRecord>& ratings) {
  std::map<std::string, std::vector<std::int64_t>> by_rater;
  for (const auto& r : ratings) by_rater[r.rater_id].push_back(r.elapsed_ms);
  std::vector<RaterTiming> out;
  for (auto& [id, times] : by_rater) out.push_back({id, std::move(times)});
  return out;
}

inline double median(std::vector<std::int64_t> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2])
               : (static_cast<double>(v[n / 2 - 1]) + static_cast<double>(v[n / 2])) / 2.0;
}

/// Raters whose median time per image is below the threshold. Flag only;
/// nothing is removed.
inline std::vector<std::string> quality_flags(const std::vector<RaterTiming>& sessions,
                                              std::int64_t min_ms_per_image) {
  std::vector<std::string> flagged;
  for (const auto& s : sessions) {
    if (s.elapsed_ms.empty()) continue;
    if (median(s.elapsed_ms) < static_cast<double>(min_ms_per_image)) flagged.push_back(s.rater_id);
  }
  return flagged;
}

}  // namespace cadprompt
