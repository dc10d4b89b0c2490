#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "knockout/cache.hpp"
#include "knockout/dataset.hpp"
#include "knockout/engine.hpp"
#include "knockout/errors.hpp"
#include "knockout/judge.hpp"
#include "knockout/metrics.hpp"
#include "knockout/prompts.hpp"
#include "knockout/remote_judge.hpp"
#include "knockout/reporting.hpp"
#include "knockout/simulate.hpp"

namespace knockout {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;  // some items ended unscorable

struct RunConfig {
  std::filesystem::path dataset_path;
  DatasetFormat format = DatasetFormat::ExamJson;
  Method method = Method::Knockout;
  JudgeConfig judge;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> prompt_dir;
  int parallel = 1;
  int max_parse_retries = 3;
  std::vector<std::string> mt_languages = default_mt_languages();
};

namespace detail {

inline void require_writable_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error("output directory is not usable: " + dir.string());
  }
  auto probe = dir / ".write-probe";
  {
    std::ofstream out(probe, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("output directory is not writable: " + dir.string());
    }
  }
  std::filesystem::remove(probe, ec);
}

inline std::shared_ptr<JudgeBackend> make_backend(
    const JudgeConfig& config,
    std::shared_ptr<ResponseCache>* cache_out,
    const std::optional<std::filesystem::path>& cache_dir) {
  std::shared_ptr<JudgeBackend> backend;
  if (config.backend == BackendKind::Remote) {
    backend = std::make_shared<RemoteJudge>(config);
  } else {
    backend = std::make_shared<SimulatedOracleJudge>(config);
  }
  if (cache_dir) {
    auto cache = std::make_shared<ResponseCache>(*cache_dir);
    if (cache_out != nullptr) *cache_out = cache;
    backend = std::make_shared<CachingJudge>(backend, cache);
  }
  return backend;
}

}  // namespace detail

// Runs the configured method over every item of the dataset and writes
// scores.csv, matches.json, and manifest.json into the output directory.
// Items whose judge output never parses are reported (exit 2) but do not
// discard the rest of the run.
inline int cmd_run(const RunConfig& config, std::ostream& log = std::cerr) {
  detail::require_writable_dir(config.out_dir);

  DedupStats dedup_stats;
  std::vector<EvaluationItem> items = load_dataset(
      config.dataset_path, config.format, config.mt_languages, &dedup_stats);
  if (config.format == DatasetFormat::MtTsv && dedup_stats.removed > 0) {
    log << "deduplicated " << dedup_stats.removed
        << " identical translation(s), " << dedup_stats.conflicts
        << " with conflicting human scores\n";
  }

  PromptLibrary prompts;
  if (config.prompt_dir) prompts.load_overrides(*config.prompt_dir);

  std::shared_ptr<ResponseCache> cache;
  std::shared_ptr<JudgeBackend> backend =
      detail::make_backend(config.judge, &cache, config.cache_dir);

  EngineConfig engine_config;
  engine_config.method = config.method;
  engine_config.seed = config.seed;
  engine_config.max_parse_retries = config.max_parse_retries;

  struct ItemOutcome {
    std::optional<AssessmentResult> result;
    std::optional<std::string> failure;
  };
  std::vector<ItemOutcome> outcomes(items.size());

  const int parallel = std::max(1, config.parallel);
  std::counting_semaphore<> slots(parallel);
  std::vector<std::future<void>> futures;
  futures.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    slots.acquire();
    futures.push_back(std::async(std::launch::async, [&, i]() {
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{slots};
      try {
        outcomes[i].result =
            run_assessment(items[i], *backend, engine_config, prompts);
      } catch (const UnscorableResponse& err) {
        outcomes[i].failure = err.what();
      }
    }));
  }
  for (auto& future : futures) future.get();

  std::vector<ScoreRow> rows;
  std::vector<AssessmentResult> results;
  std::vector<std::string> unscorable_items;
  std::uint64_t judge_requests = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (outcomes[i].result) {
      judge_requests += outcomes[i].result->judge_call_count;
      auto item_rows = rows_from_result(*outcomes[i].result, items[i]);
      rows.insert(rows.end(), item_rows.begin(), item_rows.end());
      results.push_back(std::move(*outcomes[i].result));
    } else {
      unscorable_items.push_back(items[i].id);
      log << "item '" << items[i].id
          << "' unscorable: " << outcomes[i].failure.value_or("unknown")
          << "\n";
    }
  }
  std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
    return std::tie(a.item_id, a.answer_id) < std::tie(b.item_id, b.answer_id);
  });

  write_scores_csv(config.out_dir / "scores.csv", rows);
  write_matches_json(config.out_dir / "matches.json", results);

  std::size_t scored_answers = 0;
  for (const auto& row : rows) {
    if (row.final_score) ++scored_answers;
  }

  nlohmann::json template_hashes = nlohmann::json::object();
  for (TemplateKind kind : kAllTemplateKinds) {
    template_hashes[template_name(kind)] = to_hex(prompts.body_hash(kind));
  }
  const std::uint64_t backend_calls = backend->calls_issued();
  nlohmann::json manifest = {
      {"schema_version", 1},
      {"created_at", iso8601_utc_now()},
      {"seed", config.seed},
      {"method", to_string(config.method)},
      {"backend",
       config.judge.backend == BackendKind::Remote ? "remote" : "oracle"},
      {"model_id", config.judge.model_id},
      {"temperature", config.judge.temperature},
      {"dataset",
       {{"path", config.dataset_path.string()},
        {"format", to_string(config.format)},
        {"items", items.size()}}},
      {"judge_call_count", judge_requests},
      {"backend_calls", backend_calls},
      {"cache",
       {{"enabled", static_cast<bool>(cache)},
        {"hits", cache ? cache->hits() : 0},
        {"misses", cache ? cache->misses() : 0}}},
      {"template_hashes", std::move(template_hashes)},
      {"scored_answers", scored_answers},
      {"unscorable_items", unscorable_items},
  };
  {
    std::ofstream out(config.out_dir / "manifest.json",
                      std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << "\n";
  }

  return unscorable_items.empty() ? kExitOk : kExitPartial;
}

struct ReportConfig {
  std::vector<std::filesystem::path> results_dirs;
  std::filesystem::path dataset_path;
  DatasetFormat format = DatasetFormat::ExamJson;
  std::vector<GroupingKind> groupings;  // empty = defaults for the format
  std::filesystem::path out_dir;
  std::set<ReportFormat> formats = {ReportFormat::Json, ReportFormat::Csv,
                                    ReportFormat::Markdown};
  TiePolicy tie_policy = TiePolicy::Incorrect;
  std::vector<std::string> mt_languages = default_mt_languages();
};

// Joins one or more runs' scores.csv with the dataset and emits the report
// tables. Difficulty and language splits only apply to exam datasets; MT
// reports stay whole-dataset.
inline int cmd_report(const ReportConfig& config) {
  ReportOptions options;
  options.tie_policy = config.tie_policy;
  if (!config.groupings.empty()) {
    if (config.format == DatasetFormat::MtTsv) {
      for (GroupingKind grouping : config.groupings) {
        if (grouping == GroupingKind::ByDifficulty ||
            grouping == GroupingKind::ByLanguage) {
          throw MissingLabel("grouping " + to_string(grouping) +
                             " is not available for MT datasets");
        }
      }
    }
    options.groupings = config.groupings;
  } else if (config.format == DatasetFormat::ExamJson) {
    options.groupings = {GroupingKind::WholeDataset,
                         GroupingKind::QuestionLevel, GroupingKind::ExamLevel,
                         GroupingKind::ByEliminationRound};
  } else {
    options.groupings = {GroupingKind::WholeDataset,
                         GroupingKind::ByEliminationRound};
  }

  detail::require_writable_dir(config.out_dir);
  std::vector<EvaluationItem> items =
      load_dataset(config.dataset_path, config.format, config.mt_languages);

  std::vector<ScoreRow> rows;
  for (const auto& dir : config.results_dirs) {
    auto dir_rows = read_scores_csv(dir / "scores.csv");
    rows.insert(rows.end(), dir_rows.begin(), dir_rows.end());
  }

  std::vector<AnswerRecord> records = join_rows(rows, items);
  ReportTables tables = build_report(records, options);
  write_report_files(config.out_dir, tables, config.formats);
  return kExitOk;
}

// Writes the simulation summary in the report formats.
inline int cmd_simulate(const SimulateConfig& config,
                        const std::filesystem::path& out_dir,
                        const std::set<ReportFormat>& formats = {
                            ReportFormat::Json, ReportFormat::Csv,
                            ReportFormat::Markdown}) {
  detail::require_writable_dir(out_dir);
  SimulationSummary summary = run_simulation(config);

  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : summary.methods) {
    methods.push_back({{"method", to_string(m.method)},
                       {"mean_pearson", round_decimals(m.mean_pearson, 6)},
                       {"trials_counted", m.trials_counted},
                       {"trials_skipped", m.trials_skipped},
                       {"judge_calls", m.judge_calls}});
  }
  nlohmann::json doc = {
      {"config",
       {{"n_answers", config.n_answers},
        {"trials", config.trials},
        {"sigma", config.sigma},
        {"bias", config.bias},
        {"max_points", config.max_points},
        {"latent_low", config.latent_low},
        {"latent_high", config.latent_high},
        {"seed", config.seed}}},
      {"methods", std::move(methods)},
  };
  if (formats.count(ReportFormat::Json)) {
    std::ofstream out(out_dir / "simulation.json",
                      std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
  }
  if (formats.count(ReportFormat::Csv)) {
    std::ofstream out(out_dir / "simulation.csv",
                      std::ios::binary | std::ios::trunc);
    out << "method,mean_pearson,trials_counted,trials_skipped,judge_calls\n";
    for (const auto& m : summary.methods) {
      out << to_string(m.method) << ','
          << format_number(round_decimals(m.mean_pearson, 6)) << ','
          << m.trials_counted << ',' << m.trials_skipped << ','
          << m.judge_calls << '\n';
    }
  }
  if (formats.count(ReportFormat::Markdown)) {
    std::ofstream out(out_dir / "simulation.md",
                      std::ios::binary | std::ios::trunc);
    out << "# Simulated method comparison\n\n"
        << "Answers per question: " << config.n_answers
        << ", trials: " << config.trials << ", noise sigma: "
        << format_number(config.sigma) << ", position bias: "
        << format_number(config.bias) << ", seed: " << config.seed << "\n\n"
        << "| Method | mean pearson vs latent | trials | judge calls |\n"
        << "|---|---|---|---|\n";
    for (const auto& m : summary.methods) {
      out << "| " << to_string(m.method) << " | "
          << format_number(round_decimals(m.mean_pearson, 6)) << " | "
          << m.trials_counted << " | " << m.judge_calls << " |\n";
    }
  }
  return kExitOk;
}

inline int cmd_cache_inspect(const std::filesystem::path& cache_dir,
                             std::ostream& out = std::cout) {
  ResponseCache cache(cache_dir);
  auto stats = cache.inspect();
  nlohmann::json doc = {{"dir", stats.dir.string()},
                        {"entries", stats.entries},
                        {"total_bytes", stats.total_bytes}};
  out << doc.dump(2) << "\n";
  return kExitOk;
}

inline int cmd_cache_clear(const std::filesystem::path& cache_dir,
                           std::ostream& out = std::cout) {
  ResponseCache cache(cache_dir);
  std::size_t removed = cache.clear();
  out << "removed " << removed << " cache file(s)\n";
  return kExitOk;
}

}  // namespace knockout
