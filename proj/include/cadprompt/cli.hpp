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

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cadprompt/analytics.hpp"
#include "cadprompt/backend.hpp"
#include "cadprompt/corpus.hpp"
#include "cadprompt/embedder.hpp"
#include "cadprompt/error.hpp"
#include "cadprompt/evalstats.hpp"
#include "cadprompt/execute.hpp"
#include "cadprompt/genplan.hpp"
#include "cadprompt/report.hpp"
#include "cadprompt/retrieval.hpp"
#include "cadprompt/run_manifest.hpp"
#include "cadprompt/survey_http.hpp"

namespace cadprompt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// "default7", or a comma-separated subset of its labels ("SD,CIP(1)").
inline std::vector<SettingSpec> parse_grid(const std::string& spec, std::optional<int> n_images) {
  auto grid = default_settings_grid();
  if (spec != "default7") {
    std::vector<SettingSpec> chosen;
    std::stringstream ss(spec);
    std::string label;
    while (std::getline(ss, label, ',')) {
      auto it = std::find_if(grid.begin(), grid.end(), [&](const SettingSpec& s) { return s.label == label; });
      if (it == grid.end()) throw Error(Errc::invalid_argument, "unknown setting '" + label + "' in --grid");
      chosen.push_back(*it);
    }
    if (chosen.empty()) throw Error(Errc::invalid_argument, "--grid selects no settings");
    grid = std::move(chosen);
  }
  if (n_images) {
    for (auto& s : grid) s.params.n_images = *n_images;
  }
  return grid;
}

inline std::unique_ptr<Embedder> embedder_for(const std::string& flag, const std::string& recorded_id) {
  if (!flag.empty()) return make_embedder(flag);
  if (http::is_http_url(recorded_id) || recorded_id.rfind("mock", 0) == 0) return make_embedder(recorded_id);
  throw Error(Errc::invalid_argument, "embedder '" + recorded_id + "' cannot be rebuilt; pass --embedder URL");
}

struct Options {
  std::string format = "table";
  std::string embedder;
  // ingest
  std::string manifest, out;
  // retrieve
  std::string corpus, prompt;
  std::size_t k = 1;
  // plan
  std::string prompts, grid = "default7";
  std::uint64_t seed = 0;
  std::optional<int> n_images;
  // generate
  std::string plan, backend = "mock", out_dir;
  int parallelism = 1;
  // simmatrix
  std::string artifacts, prompt_id;
  bool aggregate = false;
  // assign
  std::size_t images = 0, raters = 0, per_rater = 0, per_image = 0;
  // stats / report
  std::string ratings, a, b, dimension = "feasibility";
  std::int64_t min_ms = 2000;
  // serve / check
  std::string config, run;
};

inline void print_hits(std::ostream& out, const std::vector<RetrievalHit>& hits, bool json) {
  if (json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& h : hits) {
      j.push_back({{"rank", h.rank}, {"image_id", h.entry->image_id}, {"score", h.score}, {"uri", h.entry->uri}});
    }
    out << j.dump(2) << '\n';
    return;
  }
  out << "rank\tscore\timage_id\turi\n";
  char buf[32];
  for (const auto& h : hits) {
    std::snprintf(buf, sizeof buf, "%.6f", h.score);
    out << h.rank << '\t' << buf << '\t' << h.entry->image_id << '\t' << h.entry->uri << '\n';
  }
}

inline void print_mw(std::ostream& out, const std::string& title, const MannWhitneyResult& r, bool json) {
  if (json) {
    out << mann_whitney_to_json(r).dump(2) << '\n';
    return;
  }
  out << title << "\nU = " << r.u << "  Z = " << r.z << "  p = " << r.p_two_tailed << "  (n_a = " << r.n_a
      << ", n_b = " << r.n_b << ", " << (r.method == MwMethod::exact ? "exact" : "normal approximation")
      << ", tie-corrected, no continuity correction)\n";
}

inline void print_rho(std::ostream& out, const std::string& title, const SpearmanResult& r, bool json) {
  if (json) {
    out << spearman_to_json(r).dump(2) << '\n';
    return;
  }
  out << title << "\nrho = " << r.rho << "  p = " << r.p_two_tailed << "  (n = " << r.n << ")\n";
}

/// Single entry point for every subcommand. Exit status: 0 success, 1 usage
/// error, 2 data error.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"CAD-image-prompted generation workbench", "cadprompt"};
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Embed the images of a corpus manifest into a corpus file");
  ingest->add_option("--manifest", o.manifest, "Corpus manifest JSON")->required();
  ingest->add_option("--embedder", o.embedder, "mock[:DIM[:SEED]] (default mock) or embedding service URL");
  ingest->add_option("--out", o.out, "Corpus file to write")->required();

  auto* retrieve = app.add_subcommand("retrieve", "Rank corpus images against a text prompt");
  retrieve->add_option("--corpus", o.corpus)->required();
  retrieve->add_option("--prompt", o.prompt)->required();
  retrieve->add_option("--k", o.k)->check(CLI::PositiveNumber);
  retrieve->add_option("--format", o.format)->check(CLI::IsMember({"json", "table"}));
  retrieve->add_option("--embedder", o.embedder, "Override the embedder recorded in the corpus");

  auto* plan = app.add_subcommand("plan", "Expand prompts over generation settings");
  plan->add_option("--prompts", o.prompts)->required();
  plan->add_option("--corpus", o.corpus);
  plan->add_option("--grid", o.grid, "default7 or comma-separated setting labels");
  plan->add_option("--seed", o.seed);
  plan->add_option("--n-images", o.n_images)->check(CLI::PositiveNumber);
  plan->add_option("--embedder", o.embedder);
  plan->add_option("--out", o.out)->required();

  auto* generate = app.add_subcommand("generate", "Execute (or resume) a generation plan");
  generate->add_option("--plan", o.plan)->required();
  generate->add_option("--backend", o.backend, "mock, mock:NOISE, or backend URL");
  generate->add_option("--parallelism", o.parallelism)->check(CLI::PositiveNumber);
  generate->add_option("--out-dir", o.out_dir)->required();
  generate->add_option("--embedder", o.embedder);

  auto* simmatrix = app.add_subcommand("simmatrix", "Setting-by-setting mean similarity matrix for a prompt");
  simmatrix->add_option("--artifacts", o.artifacts, "Run directory")->required();
  auto* pid_opt = simmatrix->add_option("--prompt-id", o.prompt_id);
  auto* agg_opt = simmatrix->add_flag("--aggregate", o.aggregate, "Element-wise mean over all prompts");
  pid_opt->excludes(agg_opt);
  simmatrix->add_option("--format", o.format, "csv (default) or json")->check(CLI::IsMember({"csv", "json"}));

  auto* assign = app.add_subcommand("assign", "Balanced rater assignment");
  assign->add_option("--images", o.images);
  assign->add_option("--artifacts", o.artifacts, "Run directory; assign its artifacts instead of --images");
  assign->add_option("--raters", o.raters)->required();
  assign->add_option("--per-rater", o.per_rater)->required();
  assign->add_option("--per-image", o.per_image)->required();
  assign->add_option("--seed", o.seed);
  assign->add_option("--out", o.out)->required();

  auto* stats = app.add_subcommand("stats", "Nonparametric analyses of ratings");
  stats->require_subcommand(1);
  auto add_common = [&](CLI::App* sub, bool needs_artifacts) {
    sub->add_option("--ratings", o.ratings)->required();
    auto* opt = sub->add_option("--artifacts", o.artifacts, "Run directory mapping artifacts to settings");
    if (needs_artifacts) opt->required();
    sub->add_option("--format", o.format)->check(CLI::IsMember({"json", "table"}));
  };
  auto* pair = stats->add_subcommand("pair", "Mann-Whitney U between two settings");
  add_common(pair, true);
  pair->add_option("--a", o.a)->required();
  pair->add_option("--b", o.b)->required();
  pair->add_option("--dimension", o.dimension)->check(CLI::IsMember({"feasibility", "novelty"}));
  auto* wcorr = stats->add_subcommand("weight-corr", "Spearman between image-prompt weight and ratings");
  add_common(wcorr, true);
  wcorr->add_option("--dimension", o.dimension)->check(CLI::IsMember({"feasibility", "novelty"}));
  auto* tradeoff = stats->add_subcommand("tradeoff", "Spearman between feasibility and novelty");
  add_common(tradeoff, false);
  auto* flags = stats->add_subcommand("flags", "Raters with a median time per image below a threshold");
  add_common(flags, false);
  flags->add_option("--min-ms", o.min_ms);

  auto* report = app.add_subcommand("report", "HTML report with pairwise tests and setting summaries");
  report->add_option("--ratings", o.ratings)->required();
  report->add_option("--artifacts", o.artifacts)->required();
  report->add_option("--out", o.out)->required();
  report->add_option("--min-ms", o.min_ms);

  auto* serve = app.add_subcommand("serve", "Run the rating survey service");
  serve->add_option("--config", o.config)->required();

  auto* check = app.add_subcommand("check", "Validate a run manifest and the files it references");
  check->add_option("--run", o.run)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }
  const bool json = o.format == "json";

  try {
    if (*ingest) {
      const auto embedder = make_embedder(o.embedder.empty() ? "mock" : o.embedder);
      const auto store = ingest_corpus(fs::path(o.manifest), *embedder);
      save_corpus(store, o.out);
      out << "ingested " << store.size() << " images (dim " << store.dim() << ", embedder " << store.embedder_id()
          << ") -> " << o.out << '\n';
    } else if (*retrieve) {
      const auto store = load_corpus(o.corpus);
      const auto embedder = embedder_for(o.embedder, store.embedder_id());
      print_hits(out, top_k(store, o.prompt, o.k, *embedder), json);
    } else if (*plan) {
      const auto prompts = load_prompts(o.prompts);
      const auto grid = parse_grid(o.grid, o.n_images);
      std::optional<CorpusStore> store;
      if (!o.corpus.empty()) store = load_corpus(o.corpus);
      std::unique_ptr<Embedder> embedder;
      if (store) {
        embedder = embedder_for(o.embedder, store->embedder_id());
      } else {
        embedder = make_embedder(o.embedder.empty() ? "mock" : o.embedder);
      }
      const auto p = build_plan(prompts, grid, store ? &*store : nullptr, *embedder, o.seed);
      save_plan(p, o.out);
      out << "planned " << plan_cardinality(p) << " artifacts (" << p.prompts.size() << " prompts x "
          << p.settings.size() << " settings) -> " << o.out << '\n';
    } else if (*generate) {
      const auto p = load_plan(o.plan);
      const auto embedder = embedder_for(o.embedder, p.embedder_id);
      const auto backend = make_backend(o.backend, *embedder);
      const auto r = execute_plan(p, *backend, *embedder, o.parallelism, o.out_dir);
      out << "generated " << r.generated << ", skipped " << r.skipped << " already complete, failed "
          << r.failures.size() << "; " << r.artifacts.size() << "/" << plan_cardinality(p) << " cells complete\n";
      for (const auto& f : r.failures) {
        err << "failed: " << f.prompt_id << " " << f.setting_label << " #" << f.replicate << ": " << f.reason << '\n';
      }
      if (!r.failures.empty()) return kExitData;
    } else if (*simmatrix) {
      const auto artifacts = load_artifacts(o.artifacts);
      SimilarityMatrix m;
      if (o.aggregate) {
        std::set<std::string> ids;
        for (const auto& a : artifacts) ids.insert(a.prompt_id);
        std::vector<SimilarityMatrix> all;
        for (const auto& id : ids) all.push_back(similarity_matrix(artifacts, id));
        m = average_matrices(all);
      } else {
        if (o.prompt_id.empty()) throw CLI::RequiredError("--prompt-id or --aggregate");
        m = similarity_matrix(artifacts, o.prompt_id);
      }
      if (o.format == "json") {
        auto j = matrix_to_json(m);
        if (o.aggregate) j["note"] = "element-wise mean over prompts";
        out << j.dump(2) << '\n';
      } else {
        out << matrix_to_csv(m);
      }
    } else if (*assign) {
      AssignmentPlan a;
      if (!o.artifacts.empty()) {
        std::vector<std::string> ids;
        for (const auto& art : load_artifacts(o.artifacts)) ids.push_back(art.artifact_id);
        a = build_assignment(ids, o.raters, o.per_rater, o.per_image, o.seed);
      } else {
        a = build_assignment(o.images, o.raters, o.per_rater, o.per_image, o.seed);
      }
      write_file_atomic(o.out, assignment_to_json(a).dump(1) + "\n");
      out << "assigned " << a.params.n_images << " images to " << a.params.n_raters << " raters ("
          << a.params.per_rater_count << " each, " << a.params.per_image_count << " ratings per image) -> " << o.out
          << '\n';
    } else if (*stats) {
      const auto ratings = load_ratings(o.ratings);
      const auto means = mean_ratings(ratings);
      if (*pair) {
        const auto settings = setting_map_from(load_artifacts(o.artifacts));
        const auto d = parse_dimension(o.dimension);
        print_mw(out, o.a + " : " + o.b + " (" + dimension_name(d) + ")",
                 compare_settings(means, settings, o.a, o.b, d), json);
      } else if (*wcorr) {
        const auto settings = setting_map_from(load_artifacts(o.artifacts));
        const auto d = parse_dimension(o.dimension);
        print_rho(out, std::string("weight vs ") + dimension_name(d), weight_correlation(means, settings, d), json);
      } else if (*tradeoff) {
        print_rho(out, "feasibility vs novelty", tradeoff_correlation(means), json);
      } else if (*flags) {
        const auto flagged = quality_flags(timings_from_ratings(ratings), o.min_ms);
        if (json) {
          out << nlohmann::json(flagged).dump() << '\n';
        } else {
          for (const auto& id : flagged) out << id << '\n';
        }
      }
    } else if (*report) {
      const auto r = build_report(load_ratings(o.ratings), load_artifacts(o.artifacts), o.min_ms);
      const fs::path html = o.out;
      const auto stem = (html.parent_path() / html.stem()).string();
      write_file_atomic(html, report_html(r));
      write_file_atomic(stem + "_pairs.csv", pairs_csv(r));
      write_file_atomic(stem + "_settings.csv", summary_csv(r));
      write_file_atomic(stem + ".json", report_to_json(r).dump(2) + "\n");
      out << "report -> " << html.string() << " (+ " << stem << "_pairs.csv, " << stem << "_settings.csv, " << stem
          << ".json)\n";
    } else if (*serve) {
      SurveyServer server(load_service_config(o.config));
      const int port = server.start();
      out << "survey service listening on port " << port << std::endl;
      server.wait();
    } else if (*check) {
      out << validate_run(load_run_manifest(o.run)).dump(2) << '\n';
    }
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error (" << errc_name(e.code()) << "): " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error (corrupt): " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace cadprompt::cli
