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

#include <numeric>
#include <random>

#include "cadprompt/evalstats.hpp"
#include "test_support.hpp"

using namespace cadprompt;
using cadprompt::testkit::TempDir;

namespace {

std::vector<double> likert(std::mt19937_64& rng, std::size_t n, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  std::vector<double> out(n);
  for (auto& x : out) x = d(rng);
  return out;
}

}  // namespace

TEST(Assignment, StudyShape) {
  const auto plan = build_assignment(420, 30, 140, 10, 1);
  EXPECT_EQ(assignment_violation(plan), std::nullopt);
  EXPECT_EQ(plan.rater_ids.front(), "r01");
  EXPECT_EQ(plan.rater_ids.back(), "r30");
  EXPECT_EQ(plan.per_rater.at("r01").size(), 140u);
}

TEST(Assignment, SmallCase) {
  const auto plan = build_assignment(4, 2, 2, 1, 5);
  EXPECT_EQ(assignment_violation(plan), std::nullopt);
  std::set<std::string> all;
  for (const auto& [r, list] : plan.per_rater) all.insert(list.begin(), list.end());
  EXPECT_EQ(all, (std::set<std::string>{"img1", "img2", "img3", "img4"}));
}

TEST(Assignment, InfeasibleIdentity) {
  try {
    build_assignment(10, 3, 4, 2, 0);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::infeasible);
    EXPECT_NE(std::string(e.what()).find("20"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("12"), std::string::npos);
  }
  EXPECT_THROW(build_assignment(4, 2, 6, 3, 0), Error);  // per_image_count > n_raters
  EXPECT_THROW(build_assignment(0, 2, 6, 3, 0), Error);
  std::vector<std::string> dup = {"a", "a"};
  EXPECT_THROW(build_assignment(dup, 2, 1, 1, 0), Error);
}

TEST(Assignment, PropertyOverSeeds) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 30; ++t) {
    // n_images = raters * q and per_rater = q * per_image satisfy the identity.
    const std::size_t raters = 1 + rng() % 15;
    const std::size_t per_image = 1 + rng() % raters;
    const std::size_t q = 1 + rng() % 10;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto plan = build_assignment(raters * q, raters, q * per_image, per_image, seed);
      ASSERT_EQ(assignment_violation(plan), std::nullopt) << raters << " " << per_image << " " << q;
    }
  }
}

TEST(Assignment, DeterministicAndSeedSensitive) {
  EXPECT_EQ(build_assignment(40, 8, 10, 2, 3), build_assignment(40, 8, 10, 2, 3));
  EXPECT_NE(build_assignment(40, 8, 10, 2, 3).per_rater, build_assignment(40, 8, 10, 2, 4).per_rater);
  const auto plan = build_assignment(40, 8, 10, 2, 3);
  EXPECT_EQ(assignment_from_json(assignment_to_json(plan)), plan);
  auto j = assignment_to_json(plan);
  j["raters"][0]["artifacts"].erase(0);
  EXPECT_THROW(assignment_from_json(j), Error);
}

TEST(Ratings, MeansPerImage) {
  const std::vector<RatingRecord> ratings = {{"r1", "a", 7, 3, 100}, {"r2", "a", 5, 4, 100}};
  const auto m = mean_ratings(ratings);
  EXPECT_DOUBLE_EQ(m.at("a").feasibility, 6.0);
  EXPECT_DOUBLE_EQ(m.at("a").novelty, 3.5);
  EXPECT_EQ(m.at("a").n, 2u);

  std::vector<RatingRecord> tens;
  for (int i = 0; i < 10; ++i) tens.push_back({"r" + std::to_string(i), "b", 4, 4, 1});
  const auto m2 = mean_ratings(tens);
  EXPECT_DOUBLE_EQ(m2.at("b").feasibility, 4.0);
  EXPECT_EQ(m2.at("b").n, 10u);
}

TEST(Ratings, Validation) {
  EXPECT_THROW(validate_rating({"r", "a", 8, 3, 0}), Error);
  EXPECT_THROW(validate_rating({"r", "a", 0, 3, 0}), Error);
  EXPECT_THROW(validate_rating({"r", "a", 3, 3, -1}), Error);
  EXPECT_NO_THROW(validate_rating({"r", "a", 1, 7, 0}));
}

TEST(Ratings, LoadRejectsDuplicates) {
  TempDir dir;
  testkit::write_text(dir / "r.jsonl",
                      "{\"rater_id\":\"r1\",\"artifact_id\":\"a\",\"feasibility\":3,\"novelty\":4,\"elapsed_ms\":5}\n"
                      "{\"rater_id\":\"r1\",\"artifact_id\":\"a\",\"feasibility\":3,\"novelty\":4,\"elapsed_ms\":5}\n");
  EXPECT_THROW(load_ratings(dir / "r.jsonl"), Error);
}

TEST(MannWhitney, SeparatedSmallSamples) {
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  const auto r = mann_whitney(a, b);
  EXPECT_EQ(r.method, MwMethod::exact);
  EXPECT_EQ(r.u, 0.0);
  EXPECT_EQ(r.p_count, 2u);
  EXPECT_EQ(r.p_total, 20u);
  EXPECT_DOUBLE_EQ(r.p_two_tailed, 0.1);
  EXPECT_LT(r.z, 0.0);
}

TEST(MannWhitney, IdenticalConstantSamples) {
  const std::vector<double> a = {5, 5, 5, 5};
  const auto r = mann_whitney(a, a);
  EXPECT_EQ(r.z, 0.0);
  EXPECT_EQ(r.p_two_tailed, 1.0);
}

TEST(MannWhitney, ShiftedLargeSamples) {
  std::mt19937_64 rng(4);
  auto a = likert(rng, 40, 1, 7);
  auto b = a;
  for (auto& x : b) x += 10;
  const auto r = mann_whitney(a, b);
  EXPECT_EQ(r.method, MwMethod::normal_approx);
  EXPECT_LT(r.p_two_tailed, 0.01);
  EXPECT_EQ(r.u, 0.0);
}

TEST(MannWhitney, AgreesWithPermutationOracle) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 3; ++t) {
    const auto a = likert(rng, 45, 1, 7);
    const auto b = likert(rng, 50, 2, 7);
    const auto r = mann_whitney(a, b);
    EXPECT_NEAR(r.p_two_tailed, testkit::oracle_permutation_p(a, b, 40000, 100 + t), 0.01);
    EXPECT_NEAR(r.u, testkit::oracle_u(a, b), 1e-9);
  }
}

TEST(MannWhitney, SwapAntisymmetry) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const auto a = likert(rng, 5 + t % 20, 1, 7);
    const auto b = likert(rng, 7 + t % 13, 1, 7);
    const auto ab = mann_whitney(a, b);
    const auto ba = mann_whitney(b, a);
    EXPECT_NEAR(ab.u + ba.u, static_cast<double>(a.size() * b.size()), 1e-9);
    EXPECT_NEAR(ab.z, -ba.z, 1e-12);
    EXPECT_NEAR(ab.p_two_tailed, ba.p_two_tailed, 1e-12);
  }
}

TEST(MannWhitney, MonotoneTransformInvariance) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    auto a = likert(rng, 12, 1, 7);
    auto b = likert(rng, 9, 1, 7);
    const auto r = mann_whitney(a, b);
    for (auto& x : a) x = std::exp(x) * 3 - 1;
    for (auto& x : b) x = std::exp(x) * 3 - 1;
    const auto s = mann_whitney(a, b);
    EXPECT_EQ(r.u, s.u);
    EXPECT_EQ(r.p_two_tailed, s.p_two_tailed);
  }
}

TEST(MannWhitney, ExactEqualsEnumeration) {
  std::mt19937_64 rng(21);
  for (std::size_t na = 1; na <= 6; ++na) {
    for (std::size_t nb = 1; na + nb <= 10; ++nb) {
      std::vector<double> pool(na + nb);
      std::iota(pool.begin(), pool.end(), 1.0);
      std::shuffle(pool.begin(), pool.end(), rng);
      const std::vector<double> a(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(na));
      const std::vector<double> b(pool.begin() + static_cast<std::ptrdiff_t>(na), pool.end());
      const auto r = mann_whitney(a, b);
      const auto o = testkit::oracle_exact_p(a, b);
      ASSERT_EQ(r.method, MwMethod::exact);
      EXPECT_EQ(r.p_count, o.count);
      EXPECT_EQ(r.p_total, o.total);
    }
  }
}

TEST(MannWhitney, Errors) {
  const std::vector<double> a = {1}, empty;
  EXPECT_THROW(mann_whitney(a, empty), Error);
  const std::vector<double> bad = {1, std::nan("")};
  EXPECT_THROW(mann_whitney(a, bad), Error);
}

TEST(Spearman, PerfectOrderings) {
  const std::vector<std::pair<double, double>> up = {{1, 10}, {2, 20}, {3, 30}, {4, 40}};
  const std::vector<std::pair<double, double>> down = {{1, 40}, {2, 30}, {3, 20}, {4, 10}};
  EXPECT_DOUBLE_EQ(spearman(up).rho, 1.0);
  EXPECT_EQ(spearman(up).p_two_tailed, 0.0);
  EXPECT_DOUBLE_EQ(spearman(down).rho, -1.0);
}

TEST(Spearman, MatchesOracleWithTies) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + rng() % 60;
    const auto x = likert(rng, n, 1, 5);
    const auto y = likert(rng, n, 1, 7);
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(x[i], y[i]);
    pairs[0] = {0, 0};
    pairs[1] = {9, 9};
    const auto r = spearman(pairs);
    EXPECT_NEAR(r.rho, testkit::oracle_spearman(pairs), 1e-12);
    EXPECT_GE(r.p_two_tailed, 0.0);
    EXPECT_LE(r.p_two_tailed, 1.0);
  }
}

TEST(Spearman, KnownPValue) {
  // rho = 0.8 with n = 4: t^2 = 32/9 on 2 df, and the two-sided p is 1 - t / sqrt(2 + t^2) = 0.2.
  const std::vector<std::pair<double, double>> pairs = {{1, 1}, {2, 3}, {3, 2}, {4, 4}};
  const auto r = spearman(pairs);
  EXPECT_NEAR(r.rho, 0.8, 1e-15);
  EXPECT_NEAR(r.p_two_tailed, 0.2, 1e-12);
  EXPECT_EQ(r.n, 4u);
}

TEST(Spearman, ConstantCoordinateIsAnError) {
  const std::vector<std::pair<double, double>> flat = {{1, 2}, {1, 3}, {1, 4}};
  EXPECT_THROW(spearman(flat), Error);
  const std::vector<std::pair<double, double>> tiny = {{1, 2}, {2, 3}};
  EXPECT_THROW(spearman(tiny), Error);
}

TEST(Spearman, MonotoneInvariance) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::pair<double, double>> pairs, mapped;
    for (int i = 0; i < 20; ++i) {
      const double x = static_cast<double>(rng() % 9), y = static_cast<double>(rng() % 9);
      pairs.emplace_back(x, y);
      mapped.emplace_back(std::pow(x, 3) + 2, std::log1p(y));
    }
    EXPECT_NEAR(spearman(pairs).rho, spearman(mapped).rho, 1e-12);
  }
}

TEST(SettingAnalyses, WeightCorrelationUsesEnhancedAsZero) {
  SettingMap settings;
  std::map<std::string, ImageMeans> means;
  auto add = [&](const std::string& id, const std::string& label, Variant v, std::optional<double> w, double f) {
    settings[id] = {label, v, w};
    means[id] = {f, 8.0 - f, 10};
  };
  add("s1", "SD", Variant::base, std::nullopt, 7.0);  // excluded: would break monotonicity
  add("e1", "SD+PM", Variant::base_enhanced, std::nullopt, 1.0);
  add("e2", "SD+PM", Variant::base_enhanced, std::nullopt, 1.5);
  add("c1", "CIP(0.35)", Variant::cip, 0.35, 2.0);
  add("c2", "CIP(0.67)", Variant::cip, 0.67, 3.0);
  add("c3", "CIP(1)", Variant::cip, 1.0, 4.0);
  const auto f = weight_correlation(means, settings, Dimension::feasibility);
  EXPECT_EQ(f.n, 5u);
  EXPECT_NEAR(f.rho, testkit::oracle_spearman({{0, 1.0}, {0, 1.5}, {0.35, 2}, {0.67, 3}, {1, 4}}), 1e-12);
  const auto nov = weight_correlation(means, settings, Dimension::novelty);
  EXPECT_NEAR(nov.rho, -f.rho, 1e-12);

  const auto t = tradeoff_correlation(means);
  EXPECT_NEAR(t.rho, -1.0, 1e-12);

  settings["missing"] = {"CIP(0.83)", Variant::cip, 0.83};
  EXPECT_THROW(weight_correlation(means, settings, Dimension::feasibility), Error);
}

TEST(SettingAnalyses, CompareSettings) {
  SettingMap settings;
  std::map<std::string, ImageMeans> means;
  for (int i = 0; i < 4; ++i) {
    settings["a" + std::to_string(i)] = {"A", Variant::base, std::nullopt};
    settings["b" + std::to_string(i)] = {"B", Variant::base_enhanced, std::nullopt};
    means["a" + std::to_string(i)] = {1.0 + i, 1.0, 10};
    means["b" + std::to_string(i)] = {5.0 + i, 1.0, 10};
  }
  const auto r = compare_settings(means, settings, "A", "B", Dimension::feasibility);
  EXPECT_EQ(r.u, 0.0);
  EXPECT_EQ(r.p_count, 2u);
  EXPECT_EQ(r.p_total, 70u);
  EXPECT_THROW(compare_settings(means, settings, "A", "C", Dimension::feasibility), Error);
}

TEST(QualityFlags, MedianThreshold) {
  const std::vector<RaterTiming> sessions = {{"fast", {500, 400, 600}}, {"slow", {5000, 4000, 6000}}};
  EXPECT_EQ(quality_flags(sessions, 2000), (std::vector<std::string>{"fast"}));
  EXPECT_TRUE(quality_flags(sessions, 0).empty());
  EXPECT_EQ(quality_flags(sessions, 10000).size(), 2u);
}
