#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "knockout/domain.hpp"
#include "knockout/engine.hpp"
#include "knockout/errors.hpp"
#include "knockout/judge.hpp"
#include "knockout/metrics.hpp"
#include "knockout/util.hpp"

namespace knockout {

// Synthetic benchmark: answers with known latent qualities are scored by the
// simulated oracle under each method, and the recovered final scores are
// correlated against the latents. A noisy or position-biased oracle lets the
// methods be compared without any real judge.
struct SimulateConfig {
  int n_answers = 8;
  int trials = 100;
  double sigma = 0.0;          // oracle noise
  double bias = 0.0;           // oracle first-position bonus
  double max_points = 10.0;
  double latent_low = 0.0;
  double latent_high = 10.0;   // keep <= max_points - bias to avoid clamping
  std::uint64_t seed = 0;
  std::vector<Method> methods = {Method::Individual, Method::NaivePairwise,
                                 Method::Knockout, Method::KnockoutDebiased};
  bool naive_debiased = false;
  int max_parse_retries = 0;

  void validate() const {
    if (n_answers < 1) throw InvalidArgument("n_answers must be >= 1");
    if (trials < 1) throw InvalidArgument("trials must be >= 1");
    if (sigma < 0.0) throw InvalidArgument("sigma must be >= 0");
    if (!(max_points > 0.0)) throw InvalidArgument("max_points must be > 0");
    if (latent_low < 0.0 || latent_high > max_points ||
        latent_low > latent_high) {
      throw InvalidArgument("latent range must satisfy 0 <= low <= high <= "
                            "max_points");
    }
    if (methods.empty()) throw InvalidArgument("no methods selected");
  }
};

struct MethodSummary {
  Method method = Method::Knockout;
  double mean_pearson = 0.0;
  std::size_t trials_counted = 0;   // trials with a defined correlation
  std::size_t trials_skipped = 0;
  std::uint64_t judge_calls = 0;
};

struct SimulationSummary {
  SimulateConfig config;
  std::vector<MethodSummary> methods;

  const MethodSummary& summary_for(Method method) const {
    for (const auto& m : methods) {
      if (m.method == method) return m;
    }
    throw InvalidArgument("method not simulated: " + to_string(method));
  }
};

namespace detail {

// Latents land on the half-point grid; a redraw guarantees at least two
// distinct values so the per-trial correlation is defined.
inline std::vector<double> draw_latents(const SimulateConfig& config,
                                        std::mt19937_64& rng) {
  const auto grid_points = static_cast<std::uint64_t>(
      std::floor((config.latent_high - config.latent_low) * 2.0)) + 1;
  std::vector<double> latents(static_cast<std::size_t>(config.n_answers));
  for (int redraw = 0; redraw < 1000; ++redraw) {
    for (auto& latent : latents) {
      latent = config.latent_low +
               0.5 * static_cast<double>(rng() % grid_points);
    }
    for (double latent : latents) {
      if (latent != latents.front()) return latents;
    }
    if (latents.size() == 1) return latents;  // single answer, nothing to vary
  }
  throw DegenerateInput("latent range too narrow to draw distinct values");
}

inline EvaluationItem synthetic_item(const SimulateConfig& config, int trial,
                                     const std::vector<double>& latents) {
  std::vector<CandidateAnswer> answers;
  answers.reserve(latents.size());
  for (std::size_t i = 0; i < latents.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "ans-%02zu", i + 1);
    answers.push_back(CandidateAnswer{id, "synthetic answer " + std::string(id),
                                      latents[i], latents[i]});
  }
  char item_id[32];
  std::snprintf(item_id, sizeof item_id, "trial-%04d", trial);
  return EvaluationItem(item_id, "synthetic question", config.max_points,
                        TaskKind::ExamGrading, Language::english(),
                        std::nullopt, std::move(answers));
}

}  // namespace detail

inline SimulationSummary run_simulation(const SimulateConfig& config) {
  config.validate();

  std::map<Method, MethodSummary> summaries;
  std::map<Method, double> pearson_sums;
  for (Method method : config.methods) {
    summaries[method] = MethodSummary{method};
    pearson_sums[method] = 0.0;
  }

  for (int trial = 0; trial < config.trials; ++trial) {
    std::mt19937_64 latent_rng(
        derive_seed(derive_seed(config.seed, "latents"),
                    static_cast<std::uint64_t>(trial)));
    std::vector<double> latents = detail::draw_latents(config, latent_rng);
    EvaluationItem item = detail::synthetic_item(config, trial, latents);

    JudgeConfig judge_config;
    judge_config.backend = BackendKind::SimulatedOracle;
    judge_config.oracle_noise_sigma = config.sigma;
    judge_config.oracle_position_bias = config.bias;
    judge_config.oracle_seed = derive_seed(
        derive_seed(config.seed, "oracle"), static_cast<std::uint64_t>(trial));

    for (Method method : config.methods) {
      SimulatedOracleJudge judge(judge_config);
      EngineConfig engine_config;
      engine_config.method = method;
      engine_config.seed = derive_seed(derive_seed(config.seed, "engine"),
                                       static_cast<std::uint64_t>(trial));
      engine_config.max_parse_retries = config.max_parse_retries;

      AssessmentResult result =
          method == Method::NaivePairwise
              ? run_naive_pairwise(item, judge, engine_config,
                                   config.naive_debiased)
              : run_assessment(item, judge, engine_config);

      MethodSummary& summary = summaries[method];
      summary.judge_calls += result.judge_call_count;

      std::vector<double> recovered, reference;
      for (const auto& answer : item.answers) {
        auto it = result.final_scores.find(answer.id);
        if (it == result.final_scores.end()) continue;  // bye
        recovered.push_back(it->second);
        reference.push_back(*answer.latent_quality);
      }
      try {
        pearson_sums[method] += pearson(recovered, reference);
        ++summary.trials_counted;
      } catch (const DegenerateInput&) {
        ++summary.trials_skipped;
      }
    }
  }

  SimulationSummary out;
  out.config = config;
  for (Method method : config.methods) {
    MethodSummary summary = summaries[method];
    if (summary.trials_counted > 0) {
      summary.mean_pearson =
          pearson_sums[method] / static_cast<double>(summary.trials_counted);
    }
    out.methods.push_back(summary);
  }
  return out;
}

}  // namespace knockout
