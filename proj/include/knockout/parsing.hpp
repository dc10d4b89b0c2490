#pragma once

#include <cstdlib>
#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"

namespace knockout {

struct ParsedScores {
  std::vector<double> scores;  // size 1 (individual) or 2 (pairwise)
  std::optional<std::string> explanation;
};

namespace detail {

// Accepts "7", "7.5", "7,5" (German decimal comma), "7.0".
inline double parse_score_number(std::string text) {
  for (char& c : text) {
    if (c == ',') c = '.';
  }
  return std::strtod(text.c_str(), nullptr);
}

inline void check_range(double value, double max_points) {
  if (value < 0.0 || value > max_points) {
    throw ScoreOutOfRange(value, max_points);
  }
}

struct LabelMatch {
  double value = 0.0;
  std::size_t position = 0;  // offset of the match in the raw text
  bool found = false;
};

// Last occurrence of `pattern` wins; judges sometimes restate rubric scores
// mid-explanation and the final line carries the verdict.
inline LabelMatch last_labeled_score(std::string_view text,
                                     const std::regex& pattern) {
  LabelMatch result;
  std::cregex_iterator it(text.data(), text.data() + text.size(), pattern);
  std::cregex_iterator end;
  for (; it != end; ++it) {
    result.value = parse_score_number((*it)[1].str());
    result.position = static_cast<std::size_t>(it->position(0));
    result.found = true;
  }
  return result;
}

inline std::optional<std::string> explanation_before(
    std::string_view text, std::size_t first_score_pos) {
  static const std::regex label(
      R"((?:explanation|begründung)\s*:\s*)",
      std::regex::icase | std::regex::optimize);
  std::cmatch m;
  if (!std::regex_search(text.data(), text.data() + text.size(), m, label)) {
    return std::nullopt;
  }
  std::size_t start = static_cast<std::size_t>(m.position(0) + m.length(0));
  if (start >= first_score_pos) return std::nullopt;
  std::string_view body = text.substr(start, first_score_pos - start);
  while (!body.empty() && (body.back() == ' ' || body.back() == '\n' ||
                           body.back() == '\r' || body.back() == '\t')) {
    body.remove_suffix(1);
  }
  if (body.empty()) return std::nullopt;
  return std::string(body);
}

inline const std::string kNumber = R"(([0-9]+(?:[.,][0-9]+)?))";
inline const std::string kDenominator = R"(\s*/\s*[0-9]+(?:[.,][0-9]+)?)";

}  // namespace detail

// Extracts the single score from an individual-assessment completion.
// Accepts the "Score:" and "Punktzahl:" labels, case-insensitively, with the
// last occurrence winning.
inline ParsedScores parse_individual(std::string_view raw_text,
                                     double max_points) {
  static const std::regex pattern(
      R"((?:score|punktzahl)\s*:\s*)" + detail::kNumber + detail::kDenominator,
      std::regex::icase | std::regex::optimize);
  auto match = detail::last_labeled_score(raw_text, pattern);
  if (!match.found) {
    throw NoScoreFound("no 'Score: X/Y' pattern in judge output");
  }
  detail::check_range(match.value, max_points);
  ParsedScores result;
  result.scores = {match.value};
  result.explanation = detail::explanation_before(raw_text, match.position);
  return result;
}

// Extracts both scores from a pairwise completion, returned in label order
// ("Answer 1" before "Answer 2") regardless of where the labels appear.
inline ParsedScores parse_pairwise(std::string_view raw_text,
                                   double max_points, TaskKind task_kind) {
  struct SlotPatterns {
    std::regex first;
    std::regex second;
  };
  auto make_patterns = [](const char* label) {
    auto slot_pattern = [&](const char* slot) {
      return std::regex(std::string(label) + R"(\s*)" + slot + R"(\s*:\s*)" +
                            detail::kNumber + detail::kDenominator,
                        std::regex::icase | std::regex::optimize);
    };
    return SlotPatterns{slot_pattern("1"), slot_pattern("2")};
  };
  static const SlotPatterns exam_patterns = make_patterns("(?:answer|antwort)");
  static const SlotPatterns mt_patterns = make_patterns("translation");
  const SlotPatterns& patterns =
      task_kind == TaskKind::Translation ? mt_patterns : exam_patterns;

  auto first = detail::last_labeled_score(raw_text, patterns.first);
  auto second = detail::last_labeled_score(raw_text, patterns.second);
  if (!first.found || !second.found) {
    throw NoScoreFound("fewer than two labeled scores in judge output");
  }
  detail::check_range(first.value, max_points);
  detail::check_range(second.value, max_points);

  ParsedScores result;
  result.scores = {first.value, second.value};
  result.explanation = detail::explanation_before(
      raw_text, std::min(first.position, second.position));
  return result;
}

using CompleteFn = std::function<std::string()>;
using ParseFn = std::function<ParsedScores(const std::string&)>;

// Re-issues the judge call on parse failures, up to max_retries extra
// attempts. On success *successful_raw (when given) receives the completion
// that parsed; on exhaustion UnscorableResponse carries every raw text.
inline ParsedScores parse_with_retry(const CompleteFn& complete_fn,
                                     const ParseFn& parse_fn, int max_retries,
                                     std::string* successful_raw = nullptr) {
  if (max_retries < 0) {
    throw InvalidArgument("max_retries must be >= 0");
  }
  std::vector<std::string> raw_texts;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    raw_texts.push_back(complete_fn());
    try {
      ParsedScores parsed = parse_fn(raw_texts.back());
      if (successful_raw != nullptr) *successful_raw = raw_texts.back();
      return parsed;
    } catch (const ParseError&) {
      // fall through to retry
    }
  }
  throw UnscorableResponse(std::move(raw_texts));
}

}  // namespace knockout
