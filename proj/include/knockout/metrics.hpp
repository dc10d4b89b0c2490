#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"
#include "knockout/util.hpp"

namespace knockout {

// Sample Pearson correlation coefficient. Inputs shorter than 2 or with zero
// variance are degenerate and reported as such, never coerced to 0.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidArgument("pearson inputs must have equal length");
  }
  const std::size_t n = x.size();
  if (n < 2) {
    throw DegenerateInput("pearson needs at least 2 samples");
  }
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += x[i];
    mean_y += y[i];
  }
  mean_x /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DegenerateInput("pearson input has zero variance");
  }
  double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
  return std::min(1.0, std::max(-1.0, r));
}

enum class TiePolicy { Incorrect, HalfCredit };

struct PairCounts {
  double correct = 0.0;
  std::size_t total = 0;
};

// Counts unordered pairs with distinct human scores where the predicted
// ordering matches the human ordering. Predicted ties score 0 (or 0.5 under
// HalfCredit); pairs tied on the human side are excluded entirely.
inline PairCounts ranking_pair_counts(std::span<const double> pred,
                                      std::span<const double> human,
                                      TiePolicy ties = TiePolicy::Incorrect) {
  if (pred.size() != human.size()) {
    throw InvalidArgument("ranking inputs must have equal length");
  }
  PairCounts counts;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      if (human[i] == human[j]) continue;
      ++counts.total;
      const double pred_diff = pred[i] - pred[j];
      if (pred_diff == 0.0) {
        if (ties == TiePolicy::HalfCredit) counts.correct += 0.5;
        continue;
      }
      const bool pred_first = pred_diff > 0.0;
      const bool human_first = human[i] > human[j];
      if (pred_first == human_first) counts.correct += 1.0;
    }
  }
  return counts;
}

inline double pairwise_ranking_accuracy(
    std::span<const double> pred, std::span<const double> human,
    TiePolicy ties = TiePolicy::Incorrect) {
  PairCounts counts = ranking_pair_counts(pred, human, ties);
  if (counts.total == 0) {
    throw DegenerateInput(
        "pairwise ranking accuracy needs at least one human-distinct pair");
  }
  return counts.correct / static_cast<double>(counts.total);
}

// The "overall" cell of a method row: plain arithmetic mean of the row's
// per-dataset correlations.
inline double overall_average(std::span<const double> cells) {
  if (cells.empty()) {
    throw DegenerateInput("overall_average over an empty row");
  }
  double sum = 0.0;
  for (double cell : cells) sum += cell;
  return sum / static_cast<double>(cells.size());
}

// One scored answer joined with its reference data; the unit every report is
// computed from.
struct AnswerRecord {
  std::string exam_id;
  std::string item_id;
  std::string answer_id;
  Method method = Method::Individual;
  double final_score = 0.0;
  std::optional<double> human_score;
  std::optional<int> elimination_round;  // losers of knockout rounds
  bool champion = false;
  std::optional<Difficulty> difficulty;
  Language language;
};

enum class GroupingKind {
  WholeDataset,
  QuestionLevel,
  ExamLevel,
  ByDifficulty,
  ByLanguage,
  ByEliminationRound,
};

inline std::string to_string(GroupingKind g) {
  switch (g) {
    case GroupingKind::WholeDataset: return "whole-dataset";
    case GroupingKind::QuestionLevel: return "question-level";
    case GroupingKind::ExamLevel: return "exam-level";
    case GroupingKind::ByDifficulty: return "by-difficulty";
    case GroupingKind::ByLanguage: return "by-language";
    case GroupingKind::ByEliminationRound: return "by-elimination-round";
  }
  return "whole-dataset";
}

inline std::optional<GroupingKind> grouping_from_string(std::string_view s) {
  std::string lower = lowercase(s);
  if (lower == "whole-dataset" || lower == "whole") {
    return GroupingKind::WholeDataset;
  }
  if (lower == "question-level" || lower == "question") {
    return GroupingKind::QuestionLevel;
  }
  if (lower == "exam-level" || lower == "exam") return GroupingKind::ExamLevel;
  if (lower == "by-difficulty" || lower == "difficulty") {
    return GroupingKind::ByDifficulty;
  }
  if (lower == "by-language" || lower == "language") {
    return GroupingKind::ByLanguage;
  }
  if (lower == "by-elimination-round" || lower == "elimination") {
    return GroupingKind::ByEliminationRound;
  }
  return std::nullopt;
}

struct CorrelationReport {
  Method method = Method::Individual;
  GroupingKind grouping = GroupingKind::WholeDataset;
  std::string group_label;          // difficulty / language / "first"/"later"
  std::optional<double> pearson_r;  // nullopt = undefined (degenerate)
  std::size_t n = 0;                // answers pooled, or units averaged
  std::size_t excluded = 0;         // degenerate sub-groups left out
};

namespace detail {

inline double require_human(const AnswerRecord& row) {
  if (!row.human_score) {
    throw MissingLabel("answer '" + row.answer_id + "' of item '" +
                       row.item_id + "' has no human_score");
  }
  return *row.human_score;
}

inline std::optional<double> pooled_pearson(
    const std::vector<const AnswerRecord*>& rows) {
  std::vector<double> pred, human;
  pred.reserve(rows.size());
  human.reserve(rows.size());
  for (const AnswerRecord* row : rows) {
    pred.push_back(row->final_score);
    human.push_back(require_human(*row));
  }
  try {
    return pearson(pred, human);
  } catch (const DegenerateInput&) {
    return std::nullopt;
  }
}

// Mean of per-unit pooled correlations (question-level / exam-level
// aggregation); degenerate units are excluded and counted.
inline CorrelationReport averaged_units(
    Method method, GroupingKind grouping,
    const std::map<std::string, std::vector<const AnswerRecord*>>& units) {
  CorrelationReport report;
  report.method = method;
  report.grouping = grouping;
  double sum = 0.0;
  std::size_t defined = 0;
  for (const auto& [key, rows] : units) {
    if (auto r = pooled_pearson(rows)) {
      sum += *r;
      ++defined;
    } else {
      ++report.excluded;
    }
  }
  report.n = defined;
  if (defined > 0) report.pearson_r = sum / static_cast<double>(defined);
  return report;
}

inline CorrelationReport pooled_group(
    Method method, GroupingKind grouping, std::string label,
    const std::vector<const AnswerRecord*>& rows) {
  CorrelationReport report;
  report.method = method;
  report.grouping = grouping;
  report.group_label = std::move(label);
  report.n = rows.size();
  report.pearson_r = pooled_pearson(rows);
  if (!report.pearson_r) report.excluded = 1;
  return report;
}

inline std::string language_label(const Language& language) {
  return language.tag;
}

}  // namespace detail

// Correlation reports for one grouping, per method present in the rows.
inline std::vector<CorrelationReport> grouped_report(
    std::span<const AnswerRecord> rows, GroupingKind grouping) {
  std::map<Method, std::vector<const AnswerRecord*>> by_method;
  for (const auto& row : rows) {
    by_method[row.method].push_back(&row);
  }

  std::vector<CorrelationReport> reports;
  for (const auto& [method, method_rows] : by_method) {
    switch (grouping) {
      case GroupingKind::WholeDataset: {
        reports.push_back(detail::pooled_group(method, grouping, "",
                                               method_rows));
        break;
      }
      case GroupingKind::QuestionLevel:
      case GroupingKind::ExamLevel: {
        std::map<std::string, std::vector<const AnswerRecord*>> units;
        for (const AnswerRecord* row : method_rows) {
          const std::string& key = grouping == GroupingKind::QuestionLevel
                                       ? row->item_id
                                       : row->exam_id;
          units[key].push_back(row);
        }
        reports.push_back(detail::averaged_units(method, grouping, units));
        break;
      }
      case GroupingKind::ByDifficulty: {
        std::map<std::string, std::vector<const AnswerRecord*>> groups;
        for (const AnswerRecord* row : method_rows) {
          if (!row->difficulty) {
            throw MissingLabel("item '" + row->item_id +
                               "' has no difficulty label");
          }
          groups[to_string(*row->difficulty)].push_back(row);
        }
        for (const auto& [label, group_rows] : groups) {
          reports.push_back(
              detail::pooled_group(method, grouping, label, group_rows));
        }
        break;
      }
      case GroupingKind::ByLanguage: {
        std::map<std::string, std::vector<const AnswerRecord*>> groups;
        for (const AnswerRecord* row : method_rows) {
          groups[detail::language_label(row->language)].push_back(row);
        }
        for (const auto& [label, group_rows] : groups) {
          reports.push_back(
              detail::pooled_group(method, grouping, label, group_rows));
        }
        break;
      }
      case GroupingKind::ByEliminationRound: {
        std::vector<const AnswerRecord*> first_round, later_rounds;
        for (const AnswerRecord* row : method_rows) {
          if (row->champion) {
            later_rounds.push_back(row);
          } else if (row->elimination_round) {
            (*row->elimination_round == 1 ? first_round : later_rounds)
                .push_back(row);
          }
        }
        if (first_round.empty() && later_rounds.empty()) {
          break;  // method without elimination data (e.g. individual)
        }
        reports.push_back(
            detail::pooled_group(method, grouping, "first", first_round));
        reports.push_back(
            detail::pooled_group(method, grouping, "later", later_rounds));
        break;
      }
    }
  }
  return reports;
}

struct EliminationSplit {
  std::optional<double> first_round_r;
  std::optional<double> later_rounds_r;
  std::optional<double> difference;  // later - first, when both defined
  std::size_t n_first = 0;
  std::size_t n_later = 0;
};

// Answers scored exactly once (eliminated in round 1) versus answers graded
// multiple times (survivors and the champion).
inline EliminationSplit elimination_split(std::span<const AnswerRecord> rows) {
  std::vector<const AnswerRecord*> first_round, later_rounds;
  for (const auto& row : rows) {
    if (row.champion) {
      later_rounds.push_back(&row);
    } else if (row.elimination_round) {
      (*row.elimination_round == 1 ? first_round : later_rounds)
          .push_back(&row);
    }
  }
  EliminationSplit split;
  split.n_first = first_round.size();
  split.n_later = later_rounds.size();
  split.first_round_r = detail::pooled_pearson(first_round);
  split.later_rounds_r = detail::pooled_pearson(later_rounds);
  if (split.first_round_r && split.later_rounds_r) {
    split.difference = *split.later_rounds_r - *split.first_round_r;
  }
  return split;
}

}  // namespace knockout
