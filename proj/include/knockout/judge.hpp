#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"
#include "knockout/prompts.hpp"
#include "knockout/util.hpp"

namespace knockout {

enum class BackendKind { Remote, SimulatedOracle };

struct JudgeConfig {
  BackendKind backend = BackendKind::SimulatedOracle;
  std::string model_id = "simulated-oracle";
  double temperature = 0.1;
  int max_retries = 3;
  std::string endpoint_url;

  // Simulated-oracle knobs.
  double oracle_noise_sigma = 0.0;
  double oracle_position_bias = 0.0;
  std::uint64_t oracle_seed = 0;

  // Remote transport knobs.
  int max_in_flight = 4;
  int backoff_base_ms = 1000;  // doubles per retry, capped at 30s

  void validate() const {
    if (temperature < 0.0) throw InvalidArgument("temperature must be >= 0");
    if (max_retries < 0) throw InvalidArgument("max_retries must be >= 0");
    if (oracle_noise_sigma < 0.0) {
      throw InvalidArgument("oracle_noise_sigma must be >= 0");
    }
    if (max_in_flight < 1) throw InvalidArgument("max_in_flight must be >= 1");
    if (backend == BackendKind::Remote && endpoint_url.empty()) {
      throw InvalidArgument("remote backend needs an endpoint_url");
    }
  }
};

// What the judge is being asked about. Remote backends only need the
// rendered prompt; the simulated oracle scores from the latent qualities of
// the participating answers.
struct MatchContext {
  const EvaluationItem* item = nullptr;
  const CandidateAnswer* first = nullptr;   // listed first in the prompt
  const CandidateAnswer* second = nullptr;  // null for individual prompts
  TemplateKind template_kind = TemplateKind::IndividualExamEN;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;

  virtual std::string complete(const std::string& rendered_prompt,
                               const MatchContext& context) = 0;

  // Completions actually performed (a cache layer in front does not count).
  virtual std::uint64_t calls_issued() const = 0;

  virtual std::string model_id() const = 0;
};

namespace detail {

inline std::string format_emitted_score(double value, bool german) {
  std::string text = format_number(value);
  if (german) {
    for (char& c : text) {
      if (c == '.') c = ',';
    }
  }
  return text;
}

}  // namespace detail

// Deterministic stand-in for an LLM judge. Each answer is scored as
//   clamp(round_to_half(latent + bias * [listed first in a pair] + noise))
// with noise drawn from a stream keyed by (seed, item, participants,
// ordering), so identical calls always yield identical text.
class SimulatedOracleJudge final : public JudgeBackend {
 public:
  explicit SimulatedOracleJudge(JudgeConfig config)
      : config_(std::move(config)) {
    config_.validate();
  }

  std::string complete(const std::string& /*rendered_prompt*/,
                       const MatchContext& context) override {
    if (context.item == nullptr || context.first == nullptr) {
      throw InvalidArgument("oracle needs the match context");
    }
    calls_.fetch_add(1, std::memory_order_relaxed);

    TemplateKind kind = context.template_kind;
    const bool german = is_german(kind);
    const std::string max_text =
        detail::format_emitted_score(context.item->max_points, false);

    if (!is_pairwise(kind)) {
      double score = judged_score(*context.first, /*slot=*/0,
                                  /*listed_first_bias=*/false, context);
      std::string text = detail::format_emitted_score(score, german);
      if (german) {
        return "Begründung: deterministische synthetische Bewertung.   "
               "Punktzahl: " + text + "/" + max_text;
      }
      return "Explanation: deterministic synthetic assessment.  Score: " +
             text + "/" + max_text;
    }

    if (context.second == nullptr) {
      throw InvalidArgument("pairwise oracle call without a second answer");
    }
    double first_score = judged_score(*context.first, /*slot=*/0,
                                      /*listed_first_bias=*/true, context);
    double second_score = judged_score(*context.second, /*slot=*/1,
                                       /*listed_first_bias=*/false, context);
    std::string s1 = detail::format_emitted_score(first_score, german);
    std::string s2 = detail::format_emitted_score(second_score, german);
    switch (kind) {
      case TemplateKind::PairwiseExamDE:
        return "Begründung: deterministische synthetische Bewertung.   "
               "Antwort 1: " + s1 + "/" + max_text +
               " Antwort 2: " + s2 + "/" + max_text + ".";
      case TemplateKind::PairwiseMT:
        return "Explanation: deterministic synthetic assessment.    "
               "Translation 1: " + s1 + "/" + max_text +
               "   Translation 2: " + s2 + "/" + max_text;
      default:
        return "Explanation: deterministic synthetic assessment.  "
               "Answer 1: " + s1 + "/" + max_text +
               "  Answer 2: " + s2 + "/" + max_text;
    }
  }

  std::uint64_t calls_issued() const override {
    return calls_.load(std::memory_order_relaxed);
  }

  std::string model_id() const override { return config_.model_id; }

 private:
  double judged_score(const CandidateAnswer& answer, int slot,
                      bool listed_first_bias,
                      const MatchContext& context) const {
    if (!answer.latent_quality) {
      throw MissingLatentQuality("answer '" + answer.id +
                                 "' has no latent_quality for the oracle");
    }
    double value = *answer.latent_quality;
    if (listed_first_bias && context.second != nullptr) {
      value += config_.oracle_position_bias;
    }
    if (config_.oracle_noise_sigma > 0.0) {
      std::mt19937_64 rng(noise_seed(answer, slot, context));
      value += config_.oracle_noise_sigma * gaussian(rng);
    }
    double max_points = context.item->max_points;
    double clamped = std::min(std::max(round_to_half(value), 0.0), max_points);
    return clamped == 0.0 ? 0.0 : clamped;  // normalize -0 before formatting
  }

  std::uint64_t noise_seed(const CandidateAnswer& answer, int slot,
                           const MatchContext& context) const {
    std::uint64_t h = fnv1a64_u64(config_.oracle_seed);
    h = fnv1a64(context.item->id, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(context.first->id, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(context.second != nullptr ? context.second->id : "", h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(answer.id, h);
    h = fnv1a64_u64(static_cast<std::uint64_t>(slot), h);
    return h;
  }

  JudgeConfig config_;
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace knockout
