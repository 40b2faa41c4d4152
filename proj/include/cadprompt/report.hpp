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

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cadprompt/analytics.hpp"
#include "cadprompt/evalstats.hpp"

namespace cadprompt {

/// Setting pairs compared in the study's pairwise table, in its row order.
inline const std::vector<std::pair<std::string, std::string>>& study_pairs() {
  static const std::vector<std::pair<std::string, std::string>> pairs = {
      {"SD", "SD+PM"},           {"SD", "CIP(0.35)"},        {"SD", "CIP(0.51)"},
      {"SD", "CIP(0.67)"},       {"SD", "CIP(0.83)"},        {"SD", "CIP(1)"},
      {"SD+PM", "CIP(0.35)"},    {"SD+PM", "CIP(0.51)"},     {"SD+PM", "CIP(0.67)"},
      {"SD+PM", "CIP(0.83)"},    {"SD+PM", "CIP(1)"},        {"CIP(0.35)", "CIP(0.51)"},
      {"CIP(0.51)", "CIP(0.67)"}, {"CIP(0.67)", "CIP(0.83)"}, {"CIP(0.83)", "CIP(1)"},
  };
  return pairs;
}

struct SettingSummary {
  std::string label;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
};

struct PairRow {
  std::string a;
  std::string b;
  MannWhitneyResult feasibility;
  MannWhitneyResult novelty;
};

struct StudyReport {
  std::vector<SettingSummary> feasibility;
  std::vector<SettingSummary> novelty;
  std::vector<PairRow> pairs;
  SpearmanResult weight_feasibility;
  SpearmanResult weight_novelty;
  SpearmanResult tradeoff;
  std::vector<std::string> flagged_raters;
};

inline std::vector<std::string> present_labels(const std::map<std::string, ImageMeans>& means,
                                               const std::vector<GeneratedArtifact>& artifacts) {
  std::vector<GeneratedArtifact> rated;
  for (const auto& a : artifacts) {
    if (means.contains(a.artifact_id)) rated.push_back(a);
  }
  return ordered_labels(rated);
}

inline std::vector<SettingSummary> summarize(const std::map<std::string, ImageMeans>& means,
                                             const SettingMap& settings, const std::vector<std::string>& labels,
                                             Dimension d) {
  std::vector<SettingSummary> out;
  for (const auto& label : labels) {
    const auto xs = setting_sample(means, settings, label, d);
    SettingSummary s{label, xs.size()};
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
      s.se = s.sd / std::sqrt(static_cast<double>(xs.size()));
    }
    out.push_back(s);
  }
  return out;
}

/// Per-image-mean analysis: setting summaries, pairwise Mann-Whitney tests
/// (the study's pairs when their labels exist, otherwise every pair), weight
/// and tradeoff correlations.
inline StudyReport build_report(const std::vector<RatingRecord>& ratings,
                                const std::vector<GeneratedArtifact>& artifacts, std::int64_t min_ms_per_image) {
  const auto means = mean_ratings(ratings);
  const auto settings = setting_map_from(artifacts);
  const auto labels = present_labels(means, artifacts);
  StudyReport r;
  r.feasibility = summarize(means, settings, labels, Dimension::feasibility);
  r.novelty = summarize(means, settings, labels, Dimension::novelty);

  const std::set<std::string> have(labels.begin(), labels.end());
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& p : study_pairs()) {
    if (have.contains(p.first) && have.contains(p.second)) pairs.push_back(p);
  }
  if (pairs.empty()) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) pairs.emplace_back(labels[i], labels[j]);
    }
  }
  for (const auto& [a, b] : pairs) {
    r.pairs.push_back({a, b, compare_settings(means, settings, a, b, Dimension::feasibility),
                       compare_settings(means, settings, a, b, Dimension::novelty)});
  }
  r.weight_feasibility = weight_correlation(means, settings, Dimension::feasibility);
  r.weight_novelty = weight_correlation(means, settings, Dimension::novelty);
  r.tradeoff = tradeoff_correlation(means);
  r.flagged_raters = quality_flags(timings_from_ratings(ratings), min_ms_per_image);
  return r;
}

namespace detail {

inline std::string fmt(double v, const char* spec = "%.4g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string fmt_p(double p) { return p < 0.01 ? "<0.01" : fmt(p, "%.3g"); }

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Bar chart of means with +/- 1 SE whiskers on the 1..7 scale.
inline std::string svg_bars(const std::vector<SettingSummary>& rows, const std::string& title) {
  const int w = 60 * static_cast<int>(rows.size()) + 80, h = 260, top = 30, bottom = 210, left = 50;
  auto y_of = [&](double v) { return bottom - (v - 1.0) / 6.0 * (bottom - top); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">"
     << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">" << html_escape(title) << "</text>";
  for (int tick = 1; tick <= 7; ++tick) {
    os << "<line x1=\"" << left - 4 << "\" x2=\"" << w - 10 << "\" y1=\"" << y_of(tick) << "\" y2=\""
       << y_of(tick) << "\" stroke=\"#ddd\"/><text x=\"" << left - 20 << "\" y=\"" << y_of(tick) + 4
       << "\" font-size=\"10\">" << tick << "</text>";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double x = left + 10 + 60.0 * static_cast<double>(i);
    const auto& r = rows[i];
    os << "<rect x=\"" << x << "\" y=\"" << y_of(r.mean) << "\" width=\"40\" height=\"" << bottom - y_of(r.mean)
       << "\" fill=\"#6a8caf\"/>"
       << "<line x1=\"" << x + 20 << "\" x2=\"" << x + 20 << "\" y1=\"" << y_of(r.mean - r.se) << "\" y2=\""
       << y_of(r.mean + r.se) << "\" stroke=\"#222\"/>"
       << "<text x=\"" << x << "\" y=\"" << bottom + 16 << "\" font-size=\"9\">" << html_escape(r.label)
       << "</text>";
  }
  os << "</svg>";
  return os.str();
}

}  // namespace detail

inline std::string pairs_csv(const StudyReport& r) {
  std::ostringstream os;
  os << "settings,z_feasibility,p_feasibility,z_novelty,p_novelty,n_a,n_b,method\n";
  for (const auto& row : r.pairs) {
    os << '"' << row.a << " : " << row.b << "\"," << detail::fmt(row.feasibility.z) << ','
       << detail::fmt(row.feasibility.p_two_tailed) << ',' << detail::fmt(row.novelty.z) << ','
       << detail::fmt(row.novelty.p_two_tailed) << ',' << row.feasibility.n_a << ',' << row.feasibility.n_b << ','
       << (row.feasibility.method == MwMethod::exact ? "exact" : "normal_approx") << '\n';
  }
  return os.str();
}

inline std::string summary_csv(const StudyReport& r) {
  std::ostringstream os;
  os << "setting,n,feasibility_mean,feasibility_se,novelty_mean,novelty_se\n";
  for (std::size_t i = 0; i < r.feasibility.size(); ++i) {
    os << r.feasibility[i].label << ',' << r.feasibility[i].n << ',' << detail::fmt(r.feasibility[i].mean) << ','
       << detail::fmt(r.feasibility[i].se) << ',' << detail::fmt(r.novelty[i].mean) << ','
       << detail::fmt(r.novelty[i].se) << '\n';
  }
  return os.str();
}

inline std::string report_html(const StudyReport& r) {
  using detail::fmt;
  using detail::fmt_p;
  using detail::html_escape;
  std::ostringstream os;
  os << "<!doctype html><html><head><meta charset=\"utf-8\"><title>Feasibility and novelty report</title>"
     << "<style>body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
     << "td,th{border:1px solid #ccc;padding:4px 8px;text-align:right}th:first-child,td:first-child{text-align:left}"
     << "</style></head><body><h1>Feasibility and novelty report</h1>"
     << "<p>Unit of analysis: per-image mean ratings. Mann-Whitney U, two-tailed, tie-corrected, "
     << "no continuity correction.</p>";

  os << "<h2>Ratings by setting</h2><table><tr><th>Setting</th><th>n</th><th>Feasibility mean</th>"
     << "<th>SE</th><th>Novelty mean</th><th>SE</th></tr>";
  for (std::size_t i = 0; i < r.feasibility.size(); ++i) {
    os << "<tr><td>" << html_escape(r.feasibility[i].label) << "</td><td>" << r.feasibility[i].n << "</td><td>"
       << fmt(r.feasibility[i].mean) << "</td><td>" << fmt(r.feasibility[i].se) << "</td><td>"
       << fmt(r.novelty[i].mean) << "</td><td>" << fmt(r.novelty[i].se) << "</td></tr>";
  }
  os << "</table>" << detail::svg_bars(r.feasibility, "Perceived feasibility (mean +/- SE)")
     << detail::svg_bars(r.novelty, "Perceived novelty (mean +/- SE)");

  os << "<h2>Pairwise comparisons</h2><table><tr><th>Settings</th><th>Z (Feasibility)</th>"
     << "<th>p (Feasibility)</th><th>Z (Novelty)</th><th>p (Novelty)</th></tr>";
  for (const auto& row : r.pairs) {
    os << "<tr><td>" << html_escape(row.a + " : " + row.b) << "</td><td>" << fmt(row.feasibility.z, "%.3g")
       << "</td><td>" << fmt_p(row.feasibility.p_two_tailed) << "</td><td>" << fmt(row.novelty.z, "%.3g")
       << "</td><td>" << fmt_p(row.novelty.p_two_tailed) << "</td></tr>";
  }
  os << "</table><h2>Correlations (Spearman)</h2><table><tr><th>Pair</th><th>rho</th><th>p</th><th>n</th></tr>";
  auto corr = [&](const char* name, const SpearmanResult& s) {
    os << "<tr><td>" << name << "</td><td>" << fmt(s.rho, "%.3f") << "</td><td>" << fmt_p(s.p_two_tailed)
       << "</td><td>" << s.n << "</td></tr>";
  };
  corr("image-prompt weight vs feasibility", r.weight_feasibility);
  corr("image-prompt weight vs novelty", r.weight_novelty);
  corr("feasibility vs novelty", r.tradeoff);
  os << "</table><h2>Rater timing flags</h2><p>";
  if (r.flagged_raters.empty()) {
    os << "none";
  } else {
    for (std::size_t i = 0; i < r.flagged_raters.size(); ++i) {
      os << (i ? ", " : "") << html_escape(r.flagged_raters[i]);
    }
  }
  os << "</p></body></html>\n";
  return os.str();
}

inline nlohmann::json report_to_json(const StudyReport& r) {
  auto summaries = [](const std::vector<SettingSummary>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : rows) out.push_back({{"setting", s.label}, {"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"se", s.se}});
    return out;
  };
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& row : r.pairs) {
    pairs.push_back({{"a", row.a},
                     {"b", row.b},
                     {"feasibility", mann_whitney_to_json(row.feasibility)},
                     {"novelty", mann_whitney_to_json(row.novelty)}});
  }
  return {{"feasibility", summaries(r.feasibility)},
          {"novelty", summaries(r.novelty)},
          {"pairs", pairs},
          {"weight_feasibility", spearman_to_json(r.weight_feasibility)},
          {"weight_novelty", spearman_to_json(r.weight_novelty)},
          {"tradeoff", spearman_to_json(r.tradeoff)},
          {"flagged_raters", r.flagged_raters}};
}

}  // namespace cadprompt
