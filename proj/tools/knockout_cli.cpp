#include <cstdint>
#include <exception>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knockout/runner.hpp"

namespace {

using knockout::DatasetFormat;
using knockout::GroupingKind;
using knockout::Method;
using knockout::ReportFormat;

DatasetFormat parse_format(const std::string& text) {
  auto format = knockout::dataset_format_from_string(text);
  if (!format) {
    throw CLI::ValidationError("--format must be exam-json or mt-tsv");
  }
  return *format;
}

Method parse_method(const std::string& text) {
  auto method = knockout::method_from_string(text);
  if (!method) {
    throw CLI::ValidationError(
        "--method must be one of individual, naive-pairwise, knockout, "
        "knockout-debiased");
  }
  return *method;
}

std::set<ReportFormat> parse_report_formats(
    const std::vector<std::string>& texts) {
  std::set<ReportFormat> formats;
  for (const auto& text : texts) {
    auto format = knockout::report_format_from_string(text);
    if (!format) {
      throw CLI::ValidationError("unknown report format '" + text + "'");
    }
    formats.insert(*format);
  }
  if (formats.empty()) {
    formats = {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown};
  }
  return formats;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Tournament-style LLM judging: score candidate answers with iterative "
      "pairwise comparisons, baselines, and reports"};
  app.require_subcommand(1);

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand(
      "run", "Run an assessment method over a dataset");
  std::string run_dataset, run_format = "exam-json", run_method = "knockout";
  std::string run_backend = "oracle", run_model, run_endpoint;
  std::string run_out, run_cache, run_prompt_dir;
  double run_temperature = 0.1, run_sigma = 0.0, run_bias = 0.0;
  std::uint64_t run_seed = 0;
  int run_parallel = 1, run_retries = 3, run_max_in_flight = 4;
  std::vector<std::string> run_languages;
  run->add_option("--dataset", run_dataset, "Dataset file")->required();
  run->add_option("--format", run_format, "exam-json | mt-tsv");
  run->add_option("--method", run_method,
                  "individual | naive-pairwise | knockout | "
                  "knockout-debiased");
  run->add_option("--backend", run_backend, "remote | oracle");
  run->add_option("--model", run_model, "Model id for the remote endpoint");
  run->add_option("--endpoint", run_endpoint,
                  "Base URL of an OpenAI-compatible endpoint (auth via "
                  "LLM_API_KEY)");
  run->add_option("--temperature", run_temperature,
                  "Sampling temperature (default 0.1)");
  run->add_option("--seed", run_seed, "Run seed; pairing derives from it");
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--parallel", run_parallel,
                  "Items processed concurrently (default 1)");
  run->add_option("--prompt-dir", run_prompt_dir,
                  "Directory of prompt template overrides");
  run->add_option("--retries", run_retries,
                  "Parse retries per judge call (default 3)");
  run->add_option("--cache", run_cache,
                  "Response cache directory (enables offline replay)");
  run->add_option("--oracle-sigma", run_sigma,
                  "Oracle noise sigma (oracle backend)");
  run->add_option("--oracle-bias", run_bias,
                  "Oracle first-position bonus (oracle backend)");
  run->add_option("--max-in-flight", run_max_in_flight,
                  "Concurrent remote requests cap (default 4)");
  run->add_option("--mt-languages", run_languages,
                  "Allowed MT language tags (default: en de fr it pt hi es "
                  "th)");

  // --- report ------------------------------------------------------------
  auto* report = app.add_subcommand(
      "report", "Build correlation / accuracy tables from run results");
  std::vector<std::string> report_results;
  std::string report_dataset, report_format = "exam-json", report_out;
  std::vector<std::string> report_groupings, report_formats;
  bool report_half_credit = false;
  report->add_option("--results", report_results,
                     "Results directory (repeatable)")
      ->required();
  report->add_option("--dataset", report_dataset, "Dataset file")->required();
  report->add_option("--format", report_format, "exam-json | mt-tsv");
  report->add_option("--groupings", report_groupings,
                     "whole-dataset question-level exam-level by-difficulty "
                     "by-language by-elimination-round");
  report->add_option("--out", report_out, "Output directory")->required();
  report->add_option("--report-formats", report_formats,
                     "json csv markdown (default: all)");
  report->add_flag("--half-credit-ties", report_half_credit,
                   "Score predicted ties as 0.5 in ranking accuracy");

  // --- simulate ----------------------------------------------------------
  auto* simulate = app.add_subcommand(
      "simulate",
      "Compare methods on synthetic answers with a noisy simulated judge");
  int sim_answers = 8, sim_trials = 100;
  double sim_sigma = 0.0, sim_bias = 0.0, sim_max_points = 10.0;
  double sim_latent_low = 0.0, sim_latent_high = -1.0;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  std::vector<std::string> sim_methods, sim_formats;
  simulate->add_option("--answers", sim_answers, "Answers per question");
  simulate->add_option("--trials", sim_trials, "Number of synthetic questions");
  simulate->add_option("--sigma", sim_sigma, "Judge noise sigma");
  simulate->add_option("--bias", sim_bias, "Judge first-position bonus");
  simulate->add_option("--max-points", sim_max_points, "Grading scale");
  simulate->add_option("--latent-low", sim_latent_low, "Latent range low end");
  simulate->add_option("--latent-high", sim_latent_high,
                       "Latent range high end (default max-points)");
  simulate->add_option("--seed", sim_seed, "Simulation seed");
  simulate->add_option("--methods", sim_methods,
                       "Methods to compare (default: all)");
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_option("--report-formats", sim_formats,
                       "json csv markdown (default: all)");

  // --- cache -------------------------------------------------------------
  auto* cache = app.add_subcommand("cache", "Inspect or clear a response cache");
  cache->require_subcommand(1);
  std::string cache_dir_inspect, cache_dir_clear;
  auto* cache_inspect = cache->add_subcommand("inspect", "Show cache stats");
  cache_inspect->add_option("--cache", cache_dir_inspect, "Cache directory")
      ->required();
  auto* cache_clear = cache->add_subcommand("clear", "Delete cache entries");
  cache_clear->add_option("--cache", cache_dir_clear, "Cache directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      knockout::RunConfig config;
      config.dataset_path = run_dataset;
      config.format = parse_format(run_format);
      config.method = parse_method(run_method);
      config.seed = run_seed;
      config.out_dir = run_out;
      config.parallel = run_parallel;
      config.max_parse_retries = run_retries;
      if (!run_cache.empty()) config.cache_dir = run_cache;
      if (!run_prompt_dir.empty()) config.prompt_dir = run_prompt_dir;
      if (!run_languages.empty()) config.mt_languages = run_languages;

      knockout::JudgeConfig judge;
      if (run_backend == "remote") {
        judge.backend = knockout::BackendKind::Remote;
        judge.endpoint_url = run_endpoint;
        if (run_model.empty()) {
          throw CLI::ValidationError("--model is required with "
                                     "--backend remote");
        }
        judge.model_id = run_model;
      } else if (run_backend == "oracle") {
        judge.backend = knockout::BackendKind::SimulatedOracle;
        if (!run_model.empty()) judge.model_id = run_model;
      } else {
        throw CLI::ValidationError("--backend must be remote or oracle");
      }
      judge.temperature = run_temperature;
      judge.max_retries = run_retries;
      judge.oracle_noise_sigma = run_sigma;
      judge.oracle_position_bias = run_bias;
      judge.oracle_seed = run_seed;
      judge.max_in_flight = run_max_in_flight;
      config.judge = judge;
      return knockout::cmd_run(config);
    }

    if (report->parsed()) {
      knockout::ReportConfig config;
      for (const auto& dir : report_results) config.results_dirs.push_back(dir);
      config.dataset_path = report_dataset;
      config.format = parse_format(report_format);
      config.out_dir = report_out;
      config.formats = parse_report_formats(report_formats);
      config.tie_policy = report_half_credit ? knockout::TiePolicy::HalfCredit
                                             : knockout::TiePolicy::Incorrect;
      for (const auto& text : report_groupings) {
        auto grouping = knockout::grouping_from_string(text);
        if (!grouping) {
          throw CLI::ValidationError("unknown grouping '" + text + "'");
        }
        config.groupings.push_back(*grouping);
      }
      return knockout::cmd_report(config);
    }

    if (simulate->parsed()) {
      knockout::SimulateConfig config;
      config.n_answers = sim_answers;
      config.trials = sim_trials;
      config.sigma = sim_sigma;
      config.bias = sim_bias;
      config.max_points = sim_max_points;
      config.latent_low = sim_latent_low;
      config.latent_high =
          sim_latent_high < 0.0 ? sim_max_points : sim_latent_high;
      config.seed = sim_seed;
      if (!sim_methods.empty()) {
        config.methods.clear();
        for (const auto& text : sim_methods) {
          config.methods.push_back(parse_method(text));
        }
      }
      return knockout::cmd_simulate(config, sim_out,
                                    parse_report_formats(sim_formats));
    }

    if (cache_inspect->parsed()) {
      return knockout::cmd_cache_inspect(cache_dir_inspect);
    }
    if (cache_clear->parsed()) {
      return knockout::cmd_cache_clear(cache_dir_clear);
    }
  } catch (const CLI::Error& err) {
    return app.exit(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return knockout::kExitError;
  }
  return knockout::kExitError;
}
