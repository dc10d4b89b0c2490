#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <utility>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"
#include "knockout/metrics.hpp"
#include "knockout/util.hpp"

namespace knockout {

enum class ReportFormat { Json, Csv, Markdown };

inline std::optional<ReportFormat> report_format_from_string(
    std::string_view s) {
  std::string lower = lowercase(s);
  if (lower == "json") return ReportFormat::Json;
  if (lower == "csv") return ReportFormat::Csv;
  if (lower == "markdown" || lower == "md") return ReportFormat::Markdown;
  return std::nullopt;
}

// One scores.csv row.
struct ScoreRow {
  std::string item_id;
  std::string answer_id;
  Method method = Method::Individual;
  std::optional<double> final_score;     // empty = unscored (bye)
  std::optional<int> elimination_round;  // knockout losers only
  bool champion = false;
  std::size_t n_scores = 0;

  bool operator==(const ScoreRow&) const = default;
};

namespace detail {

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

inline std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace detail

inline std::vector<ScoreRow> rows_from_result(const AssessmentResult& result,
                                              const EvaluationItem& item) {
  std::vector<ScoreRow> rows;
  rows.reserve(item.answers.size());
  for (const auto& answer : item.answers) {
    ScoreRow row;
    row.item_id = item.id;
    row.answer_id = answer.id;
    row.method = result.method;
    if (auto it = result.final_scores.find(answer.id);
        it != result.final_scores.end()) {
      row.final_score = it->second;
    }
    if (auto status = result.ledger.elimination(answer.id)) {
      row.champion = status->champion;
      if (!status->champion) row.elimination_round = status->round;
    }
    if (result.ledger.has_entries(answer.id)) {
      row.n_scores = result.ledger.entries(answer.id).size();
    } else if (row.final_score) {
      row.n_scores = 1;  // individual assessment scores once, outside a ledger
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_scores_csv(const std::filesystem::path& path,
                             std::span<const ScoreRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << "item_id,answer_id,method,final_score,elimination_round,n_scores\n";
  for (const auto& row : rows) {
    out << detail::csv_escape(row.item_id) << ','
        << detail::csv_escape(row.answer_id) << ',' << to_string(row.method)
        << ',' << (row.final_score ? format_number(*row.final_score) : "")
        << ',';
    if (row.champion) {
      out << "champion";
    } else if (row.elimination_round) {
      out << *row.elimination_round;
    }
    out << ',' << row.n_scores << '\n';
  }
}

inline std::vector<ScoreRow> read_scores_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) ||
      detail::parse_csv_line(line) !=
          std::vector<std::string>{"item_id", "answer_id", "method",
                                   "final_score", "elimination_round",
                                   "n_scores"}) {
    throw Error("bad scores.csv header in " + path.string());
  }
  std::vector<ScoreRow> rows;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    auto fields = detail::parse_csv_line(line);
    if (fields.size() != 6) {
      throw Error(path.string() + " line " + std::to_string(line_number) +
                  ": expected 6 columns");
    }
    ScoreRow row;
    row.item_id = fields[0];
    row.answer_id = fields[1];
    auto method = method_from_string(fields[2]);
    if (!method) {
      throw Error(path.string() + " line " + std::to_string(line_number) +
                  ": unknown method '" + fields[2] + "'");
    }
    row.method = *method;
    if (!fields[3].empty()) row.final_score = std::strtod(fields[3].c_str(), nullptr);
    if (fields[4] == "champion") {
      row.champion = true;
    } else if (!fields[4].empty()) {
      row.elimination_round = std::atoi(fields[4].c_str());
    }
    row.n_scores = static_cast<std::size_t>(std::atoll(fields[5].c_str()));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json match_to_json(const std::string& item_id,
                                    const MatchRecord& match) {
  nlohmann::json orderings = nlohmann::json::array();
  for (const auto& ordering : match.orderings) {
    orderings.push_back({
        {"listed_first_id", ordering.listed_first_id},
        {"listed_second_id", ordering.listed_second_id},
        {"raw_text", ordering.raw_text},
        {"score_listed_first", ordering.score_listed_first},
        {"score_listed_second", ordering.score_listed_second},
    });
  }
  return {
      {"item_id", item_id},
      {"match_id", match.match_id},
      {"round_index", match.round_index},
      {"first_answer_id", match.first_answer_id},
      {"second_answer_id", match.second_answer_id},
      {"orderings", std::move(orderings)},
      {"final_scores",
       {{"first", match.score_first}, {"second", match.score_second}}},
      {"winner_id", match.winner_id},
  };
}

inline void write_matches_json(const std::filesystem::path& path,
                               std::span<const AssessmentResult> results) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& result : results) {
    for (const auto& match : result.matches) {
      matches.push_back(match_to_json(result.item_id, match));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << matches.dump(2) << "\n";
}

// Joins scores.csv rows with the dataset they were produced from. Rows whose
// ids do not occur in the dataset are an IdMismatch.
inline std::vector<AnswerRecord> join_rows(
    std::span<const ScoreRow> rows, std::span<const EvaluationItem> items) {
  std::map<std::string, const EvaluationItem*> item_index;
  for (const auto& item : items) item_index[item.id] = &item;

  std::vector<AnswerRecord> records;
  std::vector<std::string> orphans;
  for (const auto& row : rows) {
    auto it = item_index.find(row.item_id);
    const CandidateAnswer* answer = nullptr;
    if (it != item_index.end()) {
      for (const auto& a : it->second->answers) {
        if (a.id == row.answer_id) {
          answer = &a;
          break;
        }
      }
    }
    if (answer == nullptr) {
      orphans.push_back(row.item_id + "/" + row.answer_id);
      continue;
    }
    if (!row.final_score) continue;  // unscored (bye) rows carry no signal

    const EvaluationItem& item = *it->second;
    AnswerRecord record;
    record.item_id = item.id;
    record.exam_id = item.id.substr(0, item.id.find('/'));
    record.answer_id = row.answer_id;
    record.method = row.method;
    record.final_score = *row.final_score;
    record.human_score = answer->human_score;
    record.elimination_round = row.elimination_round;
    record.champion = row.champion;
    record.difficulty = item.difficulty;
    record.language = item.language;
    records.push_back(std::move(record));
  }
  if (!orphans.empty()) {
    throw IdMismatch("scores reference " + std::to_string(orphans.size()) +
                         " answer(s) missing from the dataset",
                     std::move(orphans));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Report tables
// ---------------------------------------------------------------------------

// All numbers are rounded once, here, so the JSON, CSV, and markdown outputs
// carry identical values. Correlations use 4 decimals; the overview's
// "overall" column reports the row mean at 3 decimals, truncated toward zero
// (reporting convention for the method-comparison table).
struct ReportTables {
  struct CorrelationRow {
    Method method;
    GroupingKind grouping;
    std::string group;
    std::optional<double> r;
    std::size_t n = 0;
    std::size_t excluded = 0;
  };
  struct OverviewRow {
    Method method;
    std::vector<std::pair<std::string, std::optional<double>>> cells;
    std::optional<double> overall;
  };
  struct AccuracyRow {
    Method method;
    std::optional<double> accuracy;
    std::size_t pairs = 0;
  };
  struct EliminationRow {
    Method method;
    std::optional<double> first_round_r;
    std::optional<double> later_rounds_r;
    std::optional<double> difference;
    std::size_t n_first = 0;
    std::size_t n_later = 0;
  };

  std::vector<CorrelationRow> correlations;
  std::vector<OverviewRow> overview;
  std::vector<AccuracyRow> ranking_accuracy;
  std::vector<EliminationRow> elimination;
  std::vector<GroupingKind> groupings;
};

struct ReportOptions {
  std::vector<GroupingKind> groupings = {GroupingKind::WholeDataset};
  TiePolicy tie_policy = TiePolicy::Incorrect;
};

inline ReportTables build_report(std::span<const AnswerRecord> records,
                                 const ReportOptions& options) {
  ReportTables tables;
  tables.groupings = options.groupings;

  auto round_r = [](std::optional<double> r) -> std::optional<double> {
    if (!r) return std::nullopt;
    return round_decimals(*r, 4);
  };

  std::set<Method> methods;
  for (const auto& record : records) methods.insert(record.method);

  for (GroupingKind grouping : options.groupings) {
    for (auto& report : grouped_report(records, grouping)) {
      tables.correlations.push_back({report.method, report.grouping,
                                     report.group_label,
                                     round_r(report.pearson_r), report.n,
                                     report.excluded});
    }
  }

  // Method overview: one row per method, one cell per aggregate grouping,
  // plus the truncated row mean.
  std::vector<GroupingKind> aggregate_groupings;
  for (GroupingKind grouping : options.groupings) {
    if (grouping == GroupingKind::WholeDataset ||
        grouping == GroupingKind::QuestionLevel ||
        grouping == GroupingKind::ExamLevel) {
      aggregate_groupings.push_back(grouping);
    }
  }
  for (Method method : methods) {
    ReportTables::OverviewRow row;
    row.method = method;
    std::vector<double> defined_cells;
    for (GroupingKind grouping : aggregate_groupings) {
      std::optional<double> value;
      for (const auto& c : tables.correlations) {
        if (c.method == method && c.grouping == grouping && c.group.empty()) {
          value = c.r;
          break;
        }
      }
      row.cells.emplace_back(to_string(grouping), value);
      if (value) defined_cells.push_back(*value);
    }
    if (!defined_cells.empty()) {
      row.overall = truncate_decimals(overall_average(defined_cells), 3);
    }
    tables.overview.push_back(std::move(row));
  }

  // Ranking accuracy: pairs pooled across questions (micro-average).
  std::map<Method, PairCounts> accuracy_counts;
  std::map<std::pair<Method, std::string>, std::vector<const AnswerRecord*>>
      per_question;
  for (const auto& record : records) {
    per_question[{record.method, record.item_id}].push_back(&record);
  }
  for (const auto& [key, rows] : per_question) {
    std::vector<double> pred, human;
    for (const AnswerRecord* row : rows) {
      pred.push_back(row->final_score);
      human.push_back(detail::require_human(*row));
    }
    PairCounts counts = ranking_pair_counts(pred, human, options.tie_policy);
    accuracy_counts[key.first].correct += counts.correct;
    accuracy_counts[key.first].total += counts.total;
  }
  for (Method method : methods) {
    ReportTables::AccuracyRow row;
    row.method = method;
    const PairCounts& counts = accuracy_counts[method];
    row.pairs = counts.total;
    if (counts.total > 0) {
      row.accuracy = round_decimals(
          counts.correct / static_cast<double>(counts.total), 4);
    }
    tables.ranking_accuracy.push_back(std::move(row));
  }

  // Elimination split, knockout methods only.
  for (Method method : methods) {
    if (method != Method::Knockout && method != Method::KnockoutDebiased) {
      continue;
    }
    std::vector<AnswerRecord> subset;
    for (const auto& record : records) {
      if (record.method == method) subset.push_back(record);
    }
    EliminationSplit split = elimination_split(subset);
    ReportTables::EliminationRow row;
    row.method = method;
    row.first_round_r = round_r(split.first_round_r);
    row.later_rounds_r = round_r(split.later_rounds_r);
    if (row.first_round_r && row.later_rounds_r) {
      row.difference =
          round_decimals(*row.later_rounds_r - *row.first_round_r, 4);
    }
    row.n_first = split.n_first;
    row.n_later = split.n_later;
    tables.elimination.push_back(std::move(row));
  }

  return tables;
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

inline std::string opt_text(const std::optional<double>& v) {
  return v ? format_number(*v) : "n/a";
}

inline std::string signed_text(const std::optional<double>& v) {
  if (!v) return "n/a";
  return (*v >= 0.0 ? "+" : "") + format_number(*v);
}

}  // namespace detail

inline nlohmann::json report_to_json(const ReportTables& tables) {
  nlohmann::json correlations = nlohmann::json::array();
  for (const auto& row : tables.correlations) {
    correlations.push_back({{"method", to_string(row.method)},
                            {"grouping", to_string(row.grouping)},
                            {"group", row.group},
                            {"pearson_r", detail::opt_json(row.r)},
                            {"n", row.n},
                            {"excluded", row.excluded}});
  }
  nlohmann::json overview = nlohmann::json::array();
  for (const auto& row : tables.overview) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& [label, value] : row.cells) {
      cells[label] = detail::opt_json(value);
    }
    overview.push_back({{"method", to_string(row.method)},
                        {"cells", std::move(cells)},
                        {"overall", detail::opt_json(row.overall)}});
  }
  nlohmann::json accuracy = nlohmann::json::array();
  for (const auto& row : tables.ranking_accuracy) {
    accuracy.push_back({{"method", to_string(row.method)},
                        {"accuracy", detail::opt_json(row.accuracy)},
                        {"pairs", row.pairs}});
  }
  nlohmann::json elimination = nlohmann::json::array();
  for (const auto& row : tables.elimination) {
    elimination.push_back(
        {{"method", to_string(row.method)},
         {"first_round_r", detail::opt_json(row.first_round_r)},
         {"later_rounds_r", detail::opt_json(row.later_rounds_r)},
         {"difference", detail::opt_json(row.difference)},
         {"n_first", row.n_first},
         {"n_later", row.n_later}});
  }
  return {{"correlations", std::move(correlations)},
          {"overview", std::move(overview)},
          {"ranking_accuracy", std::move(accuracy)},
          {"elimination_split", std::move(elimination)}};
}

inline std::string report_to_csv(const ReportTables& tables) {
  std::ostringstream out;
  out << "table,method,grouping,group,value,n,extra\n";
  for (const auto& row : tables.correlations) {
    out << "correlation," << to_string(row.method) << ','
        << to_string(row.grouping) << ',' << detail::csv_escape(row.group)
        << ',' << detail::opt_text(row.r) << ',' << row.n << ','
        << row.excluded << '\n';
  }
  for (const auto& row : tables.overview) {
    for (const auto& [label, value] : row.cells) {
      out << "overview," << to_string(row.method) << ',' << label << ",,"
          << detail::opt_text(value) << ",,\n";
    }
    out << "overview," << to_string(row.method) << ",overall,,"
        << detail::opt_text(row.overall) << ",,\n";
  }
  for (const auto& row : tables.ranking_accuracy) {
    out << "ranking-accuracy," << to_string(row.method) << ",,,"
        << detail::opt_text(row.accuracy) << ',' << row.pairs << ",\n";
  }
  for (const auto& row : tables.elimination) {
    out << "elimination-split," << to_string(row.method) << ",first-round,,"
        << detail::opt_text(row.first_round_r) << ',' << row.n_first << ",\n";
    out << "elimination-split," << to_string(row.method) << ",later-rounds,,"
        << detail::opt_text(row.later_rounds_r) << ',' << row.n_later << ",\n";
    out << "elimination-split," << to_string(row.method) << ",difference,,"
        << detail::signed_text(row.difference) << ",,\n";
  }
  return out.str();
}

inline std::string report_to_markdown(const ReportTables& tables) {
  std::ostringstream out;
  out << "# Assessment report\n";

  if (!tables.overview.empty()) {
    out << "\n## Correlation with human scores by method\n\n";
    out << "| Method |";
    for (const auto& [label, value] : tables.overview.front().cells) {
      out << ' ' << label << " |";
    }
    out << " overall |\n|---|";
    for (std::size_t i = 0; i < tables.overview.front().cells.size(); ++i) {
      out << "---|";
    }
    out << "---|\n";
    for (const auto& row : tables.overview) {
      out << "| " << to_string(row.method) << " |";
      for (const auto& [label, value] : row.cells) {
        out << ' ' << detail::opt_text(value) << " |";
      }
      out << ' ' << detail::opt_text(row.overall) << " |\n";
    }
  }

  std::vector<GroupingKind> labeled_groupings;
  for (GroupingKind grouping : tables.groupings) {
    if (grouping == GroupingKind::ByDifficulty ||
        grouping == GroupingKind::ByLanguage ||
        grouping == GroupingKind::ByEliminationRound) {
      labeled_groupings.push_back(grouping);
    }
  }
  for (GroupingKind grouping : labeled_groupings) {
    out << "\n## Correlation " << to_string(grouping) << "\n\n";
    out << "| Method | group | pearson_r | n |\n|---|---|---|---|\n";
    for (const auto& row : tables.correlations) {
      if (row.grouping != grouping) continue;
      out << "| " << to_string(row.method) << " | " << row.group << " | "
          << detail::opt_text(row.r) << " | " << row.n << " |\n";
    }
  }

  if (!tables.ranking_accuracy.empty()) {
    out << "\n## Pairwise ranking accuracy\n\n";
    out << "| Method | accuracy | pairs |\n|---|---|---|\n";
    for (const auto& row : tables.ranking_accuracy) {
      out << "| " << to_string(row.method) << " | "
          << detail::opt_text(row.accuracy) << " | " << row.pairs << " |\n";
    }
  }

  if (!tables.elimination.empty()) {
    out << "\n## Elimination-round split (scored once vs. multiple times)\n\n";
    out << "| Method | first round | later rounds | difference |\n"
           "|---|---|---|---|\n";
    for (const auto& row : tables.elimination) {
      out << "| " << to_string(row.method) << " | "
          << detail::opt_text(row.first_round_r) << " | "
          << detail::opt_text(row.later_rounds_r) << " | "
          << detail::signed_text(row.difference) << " |\n";
    }
  }
  return out.str();
}

inline void write_report_files(const std::filesystem::path& dir,
                               const ReportTables& tables,
                               const std::set<ReportFormat>& formats,
                               const std::string& stem = "report") {
  if (formats.count(ReportFormat::Json)) {
    std::ofstream out(dir / (stem + ".json"),
                      std::ios::binary | std::ios::trunc);
    out << report_to_json(tables).dump(2) << "\n";
  }
  if (formats.count(ReportFormat::Csv)) {
    std::ofstream out(dir / (stem + ".csv"),
                      std::ios::binary | std::ios::trunc);
    out << report_to_csv(tables);
  }
  if (formats.count(ReportFormat::Markdown)) {
    std::ofstream out(dir / (stem + ".md"),
                      std::ios::binary | std::ios::trunc);
    out << report_to_markdown(tables);
  }
}

}  // namespace knockout
