#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"
#include "knockout/judge.hpp"
#include "knockout/parsing.hpp"
#include "knockout/prompts.hpp"
#include "knockout/util.hpp"

namespace knockout {

struct EngineConfig {
  Method method = Method::Knockout;
  std::uint64_t seed = 0;
  int max_parse_retries = 3;
  bool concurrent_matches = true;  // same-round matches may run in parallel
};

// UnscorableResponse enriched with the tournament state reached before the
// failing match, for offline diagnostics.
class KnockoutAborted : public UnscorableResponse {
 public:
  KnockoutAborted(UnscorableResponse base, std::string item_id,
                  ScoreLedger partial_ledger)
      : UnscorableResponse(std::move(base.raw_texts),
                           "item '" + item_id + "': " + base.what()),
        item_id(std::move(item_id)),
        partial_ledger(std::move(partial_ledger)) {}
  std::string item_id;
  ScoreLedger partial_ledger;
};

struct RoundPairing {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::optional<std::string> bye_id;
};

// Shuffles the survivors with a permutation keyed by (seed, round_index) and
// pairs consecutive elements; with an odd count the final element is the bye.
// The canonical pre-shuffle order is the answer-id sort order, so the result
// does not depend on arrival order.
inline RoundPairing pair_round(std::vector<std::string> surviving_answer_ids,
                               int round_index, std::uint64_t seed) {
  if (surviving_answer_ids.size() < 2) {
    throw TooFewAnswers("pair_round needs at least 2 surviving answers");
  }
  std::sort(surviving_answer_ids.begin(), surviving_answer_ids.end());
  std::mt19937_64 rng(
      derive_seed(seed, static_cast<std::uint64_t>(round_index)));
  deterministic_shuffle(surviving_answer_ids, rng);

  RoundPairing pairing;
  std::size_t paired = surviving_answer_ids.size() & ~std::size_t{1};
  for (std::size_t i = 0; i < paired; i += 2) {
    pairing.pairs.emplace_back(surviving_answer_ids[i],
                               surviving_answer_ids[i + 1]);
  }
  if (surviving_answer_ids.size() % 2 == 1) {
    pairing.bye_id = surviving_answer_ids.back();
  }
  return pairing;
}

// Score1 > Score2 advances the first answer; everything else (ties included)
// advances the second.
inline std::string advance(const MatchRecord& match) {
  return match.score_first > match.score_second ? match.first_answer_id
                                                : match.second_answer_id;
}

namespace detail {

inline OrderingRecord judge_ordering(const EvaluationItem& item,
                                     const CandidateAnswer& listed_first,
                                     const CandidateAnswer& listed_second,
                                     JudgeBackend& judge,
                                     const PromptLibrary& prompts,
                                     int max_parse_retries,
                                     std::atomic<std::uint64_t>& call_counter) {
  TemplateKind kind = template_kind_for(item, /*pairwise=*/true);
  std::string prompt = prompts.render(kind, item, listed_first, &listed_second);
  MatchContext context{&item, &listed_first, &listed_second, kind};

  OrderingRecord record;
  record.listed_first_id = listed_first.id;
  record.listed_second_id = listed_second.id;
  ParsedScores parsed = parse_with_retry(
      [&]() {
        call_counter.fetch_add(1, std::memory_order_relaxed);
        return judge.complete(prompt, context);
      },
      [&](const std::string& raw) {
        return parse_pairwise(raw, item.max_points, item.task_kind);
      },
      max_parse_retries, &record.raw_text);
  record.score_listed_first = parsed.scores[0];
  record.score_listed_second = parsed.scores[1];
  return record;
}

}  // namespace detail

// One question-level match. Biased mode issues a single prompt with `first`
// listed as Answer 1; debiased mode also issues the swapped ordering and
// averages each answer's two scores.
inline MatchRecord run_match(const EvaluationItem& item,
                             const CandidateAnswer& first,
                             const CandidateAnswer& second,
                             JudgeBackend& judge, bool debiased,
                             const PromptLibrary& prompts,
                             int max_parse_retries, std::string match_id,
                             int round_index,
                             std::atomic<std::uint64_t>& call_counter) {
  if (first.id == second.id) {
    throw InvalidArgument("match '" + match_id +
                          "' pairs an answer against itself");
  }
  MatchRecord match;
  match.match_id = std::move(match_id);
  match.round_index = round_index;
  match.first_answer_id = first.id;
  match.second_answer_id = second.id;

  OrderingRecord forward = detail::judge_ordering(
      item, first, second, judge, prompts, max_parse_retries, call_counter);
  if (debiased) {
    OrderingRecord swapped = detail::judge_ordering(
        item, second, first, judge, prompts, max_parse_retries, call_counter);
    match.score_first =
        (forward.score_listed_first + swapped.score_listed_second) / 2.0;
    match.score_second =
        (forward.score_listed_second + swapped.score_listed_first) / 2.0;
    match.orderings = {std::move(forward), std::move(swapped)};
  } else {
    match.score_first = forward.score_listed_first;
    match.score_second = forward.score_listed_second;
    match.orderings = {std::move(forward)};
  }
  match.winner_id = advance(match);
  return match;
}

inline MatchRecord run_match(const EvaluationItem& item,
                             const CandidateAnswer& first,
                             const CandidateAnswer& second,
                             JudgeBackend& judge, bool debiased,
                             const PromptLibrary& prompts = default_prompts(),
                             int max_parse_retries = 3,
                             std::string match_id = "match",
                             int round_index = 1) {
  std::atomic<std::uint64_t> calls{0};
  return run_match(item, first, second, judge, debiased, prompts,
                   max_parse_retries, std::move(match_id), round_index, calls);
}

namespace detail {

// Runs one round's matches, concurrently when asked. Results come back in
// pairing order, so scheduling cannot influence anything downstream.
inline std::vector<MatchRecord> run_round_matches(
    const EvaluationItem& item, const RoundPairing& pairing,
    JudgeBackend& judge, bool debiased, const PromptLibrary& prompts,
    const EngineConfig& config, int round_index,
    std::atomic<std::uint64_t>& call_counter) {
  auto run_one = [&](std::size_t index) {
    const auto& [first_id, second_id] = pairing.pairs[index];
    std::string match_id = item.id + "-r" + std::to_string(round_index) +
                           "-m" + std::to_string(index + 1);
    return run_match(item, item.answer(first_id), item.answer(second_id),
                     judge, debiased, prompts, config.max_parse_retries,
                     std::move(match_id), round_index, call_counter);
  };

  std::vector<MatchRecord> matches;
  matches.reserve(pairing.pairs.size());
  if (!config.concurrent_matches || pairing.pairs.size() < 2) {
    for (std::size_t i = 0; i < pairing.pairs.size(); ++i) {
      matches.push_back(run_one(i));
    }
    return matches;
  }

  std::vector<std::future<MatchRecord>> futures;
  futures.reserve(pairing.pairs.size());
  for (std::size_t i = 0; i < pairing.pairs.size(); ++i) {
    futures.push_back(std::async(std::launch::async, run_one, i));
  }
  for (auto& future : futures) {
    matches.push_back(future.get());
  }
  return matches;
}

inline void fill_final_scores(AssessmentResult& result) {
  for (const auto& [answer_id, entries] : result.ledger.all_entries()) {
    if (!entries.empty()) {
      result.final_scores[answer_id] = result.ledger.final_average(answer_id);
    }
  }
}

}  // namespace detail

// Single-elimination tournament: shuffle-pair the survivors each round, play
// the matches, advance the winners (plus the bye), and repeat until one
// answer remains. Every per-answer match score lands in the ledger; final
// scores are the per-answer ledger means.
inline AssessmentResult run_knockout(
    const EvaluationItem& item, JudgeBackend& judge, const EngineConfig& config,
    const PromptLibrary& prompts = default_prompts()) {
  const bool debiased = config.method == Method::KnockoutDebiased;
  AssessmentResult result;
  result.method = debiased ? Method::KnockoutDebiased : Method::Knockout;
  result.item_id = item.id;
  result.seed = config.seed;
  result.ledger = ScoreLedger(item.max_points);

  if (item.answers.empty()) {
    throw TooFewAnswers("item '" + item.id + "' has no answers");
  }
  if (item.answers.size() == 1) {
    result.champion_id = item.answers.front().id;
    result.ledger.set_champion(*result.champion_id);
    result.unscored_answer_ids.push_back(item.answers.front().id);
    return result;
  }

  const std::uint64_t item_seed = derive_seed(config.seed, item.id);
  std::atomic<std::uint64_t> call_counter{0};

  std::vector<std::string> survivors;
  survivors.reserve(item.answers.size());
  for (const auto& answer : item.answers) survivors.push_back(answer.id);

  int round_index = 1;
  while (survivors.size() > 1) {
    RoundPairing pairing = pair_round(survivors, round_index, item_seed);
    std::vector<MatchRecord> matches;
    try {
      matches = detail::run_round_matches(item, pairing, judge, debiased,
                                          prompts, config, round_index,
                                          call_counter);
    } catch (const UnscorableResponse& failure) {
      result.judge_call_count = call_counter.load();
      throw KnockoutAborted(failure, item.id, std::move(result.ledger));
    }

    std::vector<std::string> next_round;
    for (auto& match : matches) {
      result.ledger.add(match.first_answer_id,
                        {round_index, match.match_id, match.score_first});
      result.ledger.add(match.second_answer_id,
                        {round_index, match.match_id, match.score_second});
      const std::string loser = match.winner_id == match.first_answer_id
                                    ? match.second_answer_id
                                    : match.first_answer_id;
      result.ledger.set_eliminated(loser, round_index);
      next_round.push_back(match.winner_id);
      result.matches.push_back(std::move(match));
    }
    if (pairing.bye_id) {
      next_round.push_back(*pairing.bye_id);  // advances without an entry
    }
    survivors = std::move(next_round);
    ++round_index;
  }

  result.champion_id = survivors.front();
  result.ledger.set_champion(survivors.front());
  detail::fill_final_scores(result);
  result.judge_call_count = call_counter.load();
  return result;
}

// Baseline: each answer is scored alone, one prompt per answer. No ledger,
// no matches, no champion.
inline AssessmentResult run_individual(
    const EvaluationItem& item, JudgeBackend& judge, const EngineConfig& config,
    const PromptLibrary& prompts = default_prompts()) {
  AssessmentResult result;
  result.method = Method::Individual;
  result.item_id = item.id;
  result.seed = config.seed;

  std::atomic<std::uint64_t> call_counter{0};
  TemplateKind kind = template_kind_for(item, /*pairwise=*/false);
  for (const auto& answer : item.answers) {
    std::string prompt = prompts.render(kind, item, answer);
    MatchContext context{&item, &answer, nullptr, kind};
    ParsedScores parsed = parse_with_retry(
        [&]() {
          call_counter.fetch_add(1, std::memory_order_relaxed);
          return judge.complete(prompt, context);
        },
        [&](const std::string& raw) {
          return parse_individual(raw, item.max_points);
        },
        config.max_parse_retries);
    result.final_scores[answer.id] = parsed.scores[0];
  }
  result.judge_call_count = call_counter.load();
  return result;
}

// Baseline: a single round of pairwise matches, no advancement. With an odd
// answer count the bye stays unscored.
inline AssessmentResult run_naive_pairwise(
    const EvaluationItem& item, JudgeBackend& judge, const EngineConfig& config,
    bool debiased = false, const PromptLibrary& prompts = default_prompts()) {
  if (item.answers.size() < 2) {
    throw TooFewAnswers("naive pairwise needs at least 2 answers, item '" +
                        item.id + "' has " +
                        std::to_string(item.answers.size()));
  }
  AssessmentResult result;
  result.method = Method::NaivePairwise;
  result.item_id = item.id;
  result.seed = config.seed;
  result.ledger = ScoreLedger(item.max_points);

  const std::uint64_t item_seed = derive_seed(config.seed, item.id);
  std::atomic<std::uint64_t> call_counter{0};

  std::vector<std::string> ids;
  ids.reserve(item.answers.size());
  for (const auto& answer : item.answers) ids.push_back(answer.id);

  RoundPairing pairing = pair_round(ids, /*round_index=*/1, item_seed);
  std::vector<MatchRecord> matches = detail::run_round_matches(
      item, pairing, judge, debiased, prompts, config, /*round_index=*/1,
      call_counter);

  for (auto& match : matches) {
    result.ledger.add(match.first_answer_id,
                      {1, match.match_id, match.score_first});
    result.ledger.add(match.second_answer_id,
                      {1, match.match_id, match.score_second});
    result.matches.push_back(std::move(match));
  }
  if (pairing.bye_id) {
    result.unscored_answer_ids.push_back(*pairing.bye_id);
  }
  detail::fill_final_scores(result);
  result.judge_call_count = call_counter.load();
  return result;
}

inline AssessmentResult run_assessment(
    const EvaluationItem& item, JudgeBackend& judge, const EngineConfig& config,
    const PromptLibrary& prompts = default_prompts()) {
  switch (config.method) {
    case Method::Individual:
      return run_individual(item, judge, config, prompts);
    case Method::NaivePairwise:
      return run_naive_pairwise(item, judge, config, /*debiased=*/false,
                                prompts);
    case Method::Knockout:
    case Method::KnockoutDebiased:
      return run_knockout(item, judge, config, prompts);
  }
  throw InvalidArgument("unknown assessment method");
}

}  // namespace knockout
