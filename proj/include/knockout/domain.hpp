#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "knockout/errors.hpp"
#include "knockout/util.hpp"

namespace knockout {

enum class TaskKind { ExamGrading, Translation };
enum class Difficulty { Easy, Medium, Hard };
enum class Method { Individual, NaivePairwise, Knockout, KnockoutDebiased };

inline std::string to_string(TaskKind kind) {
  return kind == TaskKind::ExamGrading ? "exam-grading" : "translation";
}

inline std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "easy";
}

inline std::optional<Difficulty> difficulty_from_string(std::string_view s) {
  std::string lower = lowercase(s);
  if (lower == "easy") return Difficulty::Easy;
  if (lower == "medium") return Difficulty::Medium;
  if (lower == "hard") return Difficulty::Hard;
  return std::nullopt;
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Individual: return "individual";
    case Method::NaivePairwise: return "naive-pairwise";
    case Method::Knockout: return "knockout";
    case Method::KnockoutDebiased: return "knockout-debiased";
  }
  return "individual";
}

inline std::optional<Method> method_from_string(std::string_view s) {
  std::string lower = lowercase(s);
  if (lower == "individual") return Method::Individual;
  if (lower == "naive-pairwise") return Method::NaivePairwise;
  if (lower == "knockout") return Method::Knockout;
  if (lower == "knockout-debiased") return Method::KnockoutDebiased;
  return std::nullopt;
}

struct Language {
  enum class Code { English, German, Other };
  Code code = Code::English;
  std::string tag = "en";

  static Language english() { return {Code::English, "en"}; }
  static Language german() { return {Code::German, "de"}; }
  static Language other(std::string tag) {
    return {Code::Other, std::move(tag)};
  }

  static Language from_tag(std::string_view tag) {
    std::string lower = lowercase(tag);
    if (lower == "en" || lower == "eng" || lower == "english") {
      return english();
    }
    if (lower == "de" || lower == "deu" || lower == "ger" ||
        lower == "german") {
      return german();
    }
    return other(std::string(tag));
  }

  bool operator==(const Language&) const = default;
};

// One response to be judged. human_score is the expert reference used by the
// metrics; latent_quality is consulted only by the simulated judge.
struct CandidateAnswer {
  std::string id;
  std::string text;
  std::optional<double> human_score;
  std::optional<double> latent_quality;

  bool operator==(const CandidateAnswer&) const = default;
};

// A question (or MT source sentence) together with its candidate answers and
// grading scale. Construction validates every invariant; instances are
// treated as immutable afterwards.
struct EvaluationItem {
  std::string id;
  std::string prompt_text;
  double max_points = 0.0;
  TaskKind task_kind = TaskKind::ExamGrading;
  Language language;
  std::optional<Difficulty> difficulty;
  std::vector<CandidateAnswer> answers;

  EvaluationItem(std::string id, std::string prompt_text, double max_points,
                 TaskKind task_kind, Language language,
                 std::optional<Difficulty> difficulty,
                 std::vector<CandidateAnswer> answers)
      : id(std::move(id)),
        prompt_text(std::move(prompt_text)),
        max_points(max_points),
        task_kind(task_kind),
        language(std::move(language)),
        difficulty(difficulty),
        answers(std::move(answers)) {
    validate();
  }

  void validate() const {
    if (!(max_points > 0.0) || !std::isfinite(max_points)) {
      throw InvalidArgument("item '" + id + "': max_points must be > 0");
    }
    if (task_kind == TaskKind::Translation && max_points != 100.0) {
      throw InvalidArgument("item '" + id +
                            "': translation items use a 0-100 scale");
    }
    std::set<std::string> seen;
    for (const auto& answer : answers) {
      if (!seen.insert(answer.id).second) {
        throw InvalidArgument("item '" + id + "': duplicate answer id '" +
                              answer.id + "'");
      }
      for (const auto& [label, value] :
           {std::pair{"human_score", answer.human_score},
            std::pair{"latent_quality", answer.latent_quality}}) {
        if (value && (*value < 0.0 || *value > max_points ||
                      !std::isfinite(*value))) {
          throw InvalidArgument("item '" + id + "': answer '" + answer.id +
                                "' has " + label + " outside [0, " +
                                format_number(max_points) + "]");
        }
      }
    }
  }

  const CandidateAnswer& answer(const std::string& answer_id) const {
    for (const auto& a : answers) {
      if (a.id == answer_id) return a;
    }
    throw UnknownAnswer("item '" + id + "' has no answer '" + answer_id + "'");
  }

  bool operator==(const EvaluationItem&) const = default;
};

struct ScoreEntry {
  int round_index = 1;
  std::string match_id;
  double score = 0.0;

  bool operator==(const ScoreEntry&) const = default;
};

struct EliminationStatus {
  bool champion = false;
  int round = 0;  // meaningful only when !champion

  static EliminationStatus make_champion() { return {true, 0}; }
  static EliminationStatus eliminated(int round) { return {false, round}; }

  bool operator==(const EliminationStatus&) const = default;
};

// Per-answer score history accumulated across a tournament, plus the round in
// which each answer dropped out (or the champion marker).
class ScoreLedger {
 public:
  ScoreLedger() = default;
  explicit ScoreLedger(double max_points) : max_points_(max_points) {}

  void add(const std::string& answer_id, ScoreEntry entry) {
    if (entry.round_index < 1) {
      throw InvalidArgument("ledger entry round_index must be >= 1");
    }
    if (entry.score < 0.0 || entry.score > max_points_) {
      throw InvalidArgument("ledger entry score " +
                            format_number(entry.score) + " outside [0, " +
                            format_number(max_points_) + "]");
    }
    entries_[answer_id].push_back(std::move(entry));
  }

  void set_eliminated(const std::string& answer_id, int round) {
    if (round < 1) throw InvalidArgument("elimination round must be >= 1");
    elimination_[answer_id] = EliminationStatus::eliminated(round);
  }

  void set_champion(const std::string& answer_id) {
    elimination_[answer_id] = EliminationStatus::make_champion();
  }

  bool has_entries(const std::string& answer_id) const {
    auto it = entries_.find(answer_id);
    return it != entries_.end() && !it->second.empty();
  }

  const std::vector<ScoreEntry>& entries(const std::string& answer_id) const {
    auto it = entries_.find(answer_id);
    if (it == entries_.end()) {
      throw UnknownAnswer("ledger has no entries for answer '" + answer_id +
                          "'");
    }
    return it->second;
  }

  // Mean of every score the answer received throughout the tournament.
  double final_average(const std::string& answer_id) const {
    const auto& list = entries(answer_id);
    if (list.empty()) {
      throw UnknownAnswer("ledger has no entries for answer '" + answer_id +
                          "'");
    }
    double sum = 0.0;
    for (const auto& entry : list) sum += entry.score;
    return sum / static_cast<double>(list.size());
  }

  std::optional<EliminationStatus> elimination(
      const std::string& answer_id) const {
    auto it = elimination_.find(answer_id);
    if (it == elimination_.end()) return std::nullopt;
    return it->second;
  }

  const std::map<std::string, std::vector<ScoreEntry>>& all_entries() const {
    return entries_;
  }

  std::size_t total_entries() const {
    std::size_t n = 0;
    for (const auto& [id, list] : entries_) n += list.size();
    return n;
  }

  bool empty() const { return entries_.empty(); }

  double max_points() const { return max_points_; }

  bool operator==(const ScoreLedger&) const = default;

 private:
  double max_points_ = std::numeric_limits<double>::infinity();
  std::map<std::string, std::vector<ScoreEntry>> entries_;
  std::map<std::string, EliminationStatus> elimination_;
};

inline double final_average(const ScoreLedger& ledger,
                            const std::string& answer_id) {
  return ledger.final_average(answer_id);
}

// One presentation of a pair to the judge: who was listed first, the raw
// completion, and the two scores parsed from it (in listed order).
struct OrderingRecord {
  std::string listed_first_id;
  std::string listed_second_id;
  std::string raw_text;
  double score_listed_first = 0.0;
  double score_listed_second = 0.0;

  bool operator==(const OrderingRecord&) const = default;
};

// A question-level match: two answers judged inside one prompt (twice, in
// debiased mode).
struct MatchRecord {
  std::string match_id;
  int round_index = 1;
  std::string first_answer_id;
  std::string second_answer_id;
  std::vector<OrderingRecord> orderings;  // size 1 (biased) or 2 (debiased)
  double score_first = 0.0;
  double score_second = 0.0;
  std::string winner_id;

  bool operator==(const MatchRecord&) const = default;
};

struct AssessmentResult {
  Method method = Method::Individual;
  std::string item_id;
  std::map<std::string, double> final_scores;  // absent key = unscored
  ScoreLedger ledger;
  std::vector<MatchRecord> matches;
  std::optional<std::string> champion_id;
  std::vector<std::string> unscored_answer_ids;
  std::uint64_t judge_call_count = 0;
  std::uint64_t seed = 0;

  bool operator==(const AssessmentResult&) const = default;
};

}  // namespace knockout
