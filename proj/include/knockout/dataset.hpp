#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"
#include "knockout/util.hpp"

namespace knockout {

enum class DatasetFormat { ExamJson, MtTsv };

inline std::optional<DatasetFormat> dataset_format_from_string(
    std::string_view s) {
  std::string lower = lowercase(s);
  if (lower == "exam-json") return DatasetFormat::ExamJson;
  if (lower == "mt-tsv") return DatasetFormat::MtTsv;
  return std::nullopt;
}

inline std::string to_string(DatasetFormat f) {
  return f == DatasetFormat::ExamJson ? "exam-json" : "mt-tsv";
}

// Languages the judge models cover; MT rows in other languages are dropped.
inline const std::vector<std::string>& default_mt_languages() {
  static const std::vector<std::string> langs = {"en", "de", "fr", "it",
                                                 "pt", "hi", "es", "th"};
  return langs;
}

struct DedupStats {
  std::size_t removed = 0;
  std::size_t conflicts = 0;  // dropped duplicates whose human score differed
};

// Removes answers whose translation text is byte-identical to an earlier one
// under the same source. The first occurrence (and its human score) wins;
// score disagreements among dropped copies are counted as conflicts.
inline EvaluationItem dedup_identical_translations(
    const EvaluationItem& item, DedupStats* stats = nullptr) {
  if (item.task_kind != TaskKind::Translation) {
    throw InvalidArgument("dedup applies to translation items only");
  }
  std::map<std::string, const CandidateAnswer*> first_by_text;
  std::vector<CandidateAnswer> kept;
  kept.reserve(item.answers.size());
  for (const auto& answer : item.answers) {
    auto [it, inserted] = first_by_text.emplace(answer.text, &answer);
    if (inserted) {
      kept.push_back(answer);
      continue;
    }
    if (stats != nullptr) {
      ++stats->removed;
      if (answer.human_score != it->second->human_score) ++stats->conflicts;
    }
  }
  return EvaluationItem(item.id, item.prompt_text, item.max_points,
                        item.task_kind, item.language, item.difficulty,
                        std::move(kept));
}

namespace detail {

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw SchemaError("cannot open dataset file: " + path.string());
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw SchemaError("invalid JSON in " + path.string() + ": " + err.what());
  }
}

inline const nlohmann::json& require_field(const nlohmann::json& object,
                                           const std::string& field,
                                           const std::string& where) {
  auto it = object.find(field);
  if (it == object.end() || it->is_null()) {
    throw SchemaError("missing field '" + field + "' in " + where);
  }
  return *it;
}

inline std::string require_string(const nlohmann::json& object,
                                  const std::string& field,
                                  const std::string& where) {
  const auto& value = require_field(object, field, where);
  if (!value.is_string()) {
    throw SchemaError("field '" + field + "' in " + where +
                      " must be a string");
  }
  return value.get<std::string>();
}

inline double require_number(const nlohmann::json& object,
                             const std::string& field,
                             const std::string& where) {
  const auto& value = require_field(object, field, where);
  if (!value.is_number()) {
    throw SchemaError("field '" + field + "' in " + where +
                      " must be a number");
  }
  return value.get<double>();
}

inline std::optional<double> optional_number(const nlohmann::json& object,
                                             const std::string& field,
                                             const std::string& where) {
  auto it = object.find(field);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) {
    throw SchemaError("field '" + field + "' in " + where +
                      " must be a number");
  }
  return it->get<double>();
}

}  // namespace detail

// Exam file layout (schema_version 1):
//   {schema_version, exam_id, language,
//    questions: [{id, text, max_points, difficulty?,
//                 answers: [{examinee_id, text, human_score?,
//                            latent_quality?}]}]}
// Item ids are "<exam_id>/<question_id>"; the prefix doubles as the
// exam-level grouping key.
inline std::vector<EvaluationItem> load_exam_dataset(
    const std::filesystem::path& path) {
  nlohmann::json root = detail::parse_json_file(path);
  if (!root.is_object()) {
    throw SchemaError("exam dataset root must be an object");
  }
  const auto& version = detail::require_field(root, "schema_version", "root");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    throw SchemaError("unsupported schema_version (expected 1)");
  }
  const std::string exam_id = detail::require_string(root, "exam_id", "root");
  if (exam_id.empty() || exam_id.find('/') != std::string::npos) {
    throw SchemaError("exam_id must be non-empty and contain no '/'");
  }
  Language language =
      Language::from_tag(detail::require_string(root, "language", "root"));

  const auto& questions = detail::require_field(root, "questions", "root");
  if (!questions.is_array()) {
    throw SchemaError("field 'questions' must be an array");
  }

  std::vector<EvaluationItem> items;
  std::set<std::string> question_ids;
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const std::string where = "questions[" + std::to_string(qi) + "]";
    const auto& question = questions[qi];
    if (!question.is_object()) {
      throw SchemaError(where + " must be an object");
    }
    const std::string question_id =
        detail::require_string(question, "id", where);
    if (!question_ids.insert(question_id).second) {
      throw SchemaError("duplicate question id '" + question_id + "'");
    }
    const std::string text = detail::require_string(question, "text", where);
    const double max_points =
        detail::require_number(question, "max_points", where);
    if (!(max_points > 0.0)) {
      throw SchemaError("field 'max_points' in " + where + " must be > 0");
    }

    std::optional<Difficulty> difficulty;
    if (auto it = question.find("difficulty");
        it != question.end() && !it->is_null()) {
      if (!it->is_string()) {
        throw SchemaError("field 'difficulty' in " + where +
                          " must be a string");
      }
      difficulty = difficulty_from_string(it->get<std::string>());
      if (!difficulty) {
        throw SchemaError("field 'difficulty' in " + where +
                          " must be one of easy/medium/hard, got '" +
                          it->get<std::string>() + "'");
      }
    }

    const auto& answers_json =
        detail::require_field(question, "answers", where);
    if (!answers_json.is_array()) {
      throw SchemaError("field 'answers' in " + where + " must be an array");
    }
    std::vector<CandidateAnswer> answers;
    std::set<std::string> answer_ids;
    for (std::size_t ai = 0; ai < answers_json.size(); ++ai) {
      const std::string answer_where =
          where + ".answers[" + std::to_string(ai) + "]";
      const auto& answer_json = answers_json[ai];
      CandidateAnswer answer;
      answer.id =
          detail::require_string(answer_json, "examinee_id", answer_where);
      if (!answer_ids.insert(answer.id).second) {
        throw DuplicateAnswerId("duplicate examinee_id '" + answer.id +
                                "' in " + where);
      }
      answer.text = detail::require_string(answer_json, "text", answer_where);
      answer.human_score =
          detail::optional_number(answer_json, "human_score", answer_where);
      answer.latent_quality =
          detail::optional_number(answer_json, "latent_quality", answer_where);
      for (const auto& [label, value] :
           {std::pair{"human_score", answer.human_score},
            std::pair{"latent_quality", answer.latent_quality}}) {
        if (value && (*value < 0.0 || *value > max_points)) {
          throw SchemaError("field '" + std::string(label) + "' in " +
                            answer_where + " outside [0, " +
                            format_number(max_points) + "]");
        }
      }
      answers.push_back(std::move(answer));
    }

    items.emplace_back(exam_id + "/" + question_id, text, max_points,
                       TaskKind::ExamGrading, language, difficulty,
                       std::move(answers));
  }
  return items;
}

namespace detail {

inline std::vector<std::string> split_tsv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline bool pair_languages_allowed(const std::string& language_pair,
                                   const std::set<std::string>& allowed) {
  if (allowed.empty()) return true;
  std::string tag;
  for (std::size_t i = 0; i <= language_pair.size(); ++i) {
    if (i == language_pair.size() || language_pair[i] == '-') {
      if (!tag.empty() && allowed.find(lowercase(tag)) == allowed.end()) {
        return false;
      }
      tag.clear();
    } else {
      tag.push_back(language_pair[i]);
    }
  }
  return true;
}

}  // namespace detail

// MT file layout: UTF-8 TSV with header
//   source_id  language_pair  source  translation  system_id  human_score
// Rows group by source_id into one item per source sentence (scale fixed at
// 0-100); rows whose language_pair contains a tag outside allowed_languages
// are dropped, then identical translations of the same source are
// deduplicated.
inline std::vector<EvaluationItem> load_mt_dataset(
    const std::filesystem::path& path,
    const std::vector<std::string>& allowed_languages = default_mt_languages(),
    DedupStats* dedup_stats = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw SchemaError("cannot open dataset file: " + path.string());
  }
  std::set<std::string> allowed;
  for (const auto& tag : allowed_languages) allowed.insert(lowercase(tag));

  static const std::vector<std::string> kHeader = {
      "source_id", "language_pair", "source",
      "translation", "system_id",   "human_score"};

  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaError("empty MT dataset: " + path.string());
  }
  if (detail::split_tsv_line(line) != kHeader) {
    throw SchemaError(
        "bad MT header; expected: source_id, language_pair, source, "
        "translation, system_id, human_score");
  }

  struct PendingItem {
    std::string source;
    std::string language_pair;
    std::vector<CandidateAnswer> answers;
    std::set<std::string> system_ids;
  };
  std::vector<std::string> order;
  std::map<std::string, PendingItem> pending;

  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    auto fields = detail::split_tsv_line(line);
    const std::string where = "line " + std::to_string(line_number);
    if (fields.size() != kHeader.size()) {
      throw SchemaError(where + ": expected " +
                        std::to_string(kHeader.size()) + " columns, got " +
                        std::to_string(fields.size()));
    }
    const std::string& source_id = fields[0];
    const std::string& language_pair = fields[1];
    const std::string& source = fields[2];
    const std::string& translation = fields[3];
    const std::string& system_id = fields[4];
    const std::string& score_text = fields[5];
    if (source_id.empty()) {
      throw SchemaError(where + ": empty source_id");
    }

    if (!detail::pair_languages_allowed(language_pair, allowed)) continue;

    std::optional<double> human_score;
    if (!score_text.empty()) {
      char* end = nullptr;
      double value = std::strtod(score_text.c_str(), &end);
      if (end == score_text.c_str() || *end != '\0') {
        throw SchemaError(where + ": human_score '" + score_text +
                          "' is not a number");
      }
      if (value < 0.0 || value > 100.0) {
        throw SchemaError(where + ": human_score " + score_text +
                          " outside [0, 100]");
      }
      human_score = value;
    }

    auto [it, inserted] = pending.emplace(source_id, PendingItem{});
    PendingItem& item = it->second;
    if (inserted) {
      order.push_back(source_id);
      item.source = source;
      item.language_pair = language_pair;
    } else {
      if (item.source != source) {
        throw SchemaError(where + ": source_id '" + source_id +
                          "' repeats with different source text");
      }
      if (item.language_pair != language_pair) {
        throw SchemaError(where + ": source_id '" + source_id +
                          "' repeats with different language_pair");
      }
    }
    if (!item.system_ids.insert(system_id).second) {
      throw DuplicateAnswerId(where + ": duplicate system_id '" + system_id +
                              "' for source '" + source_id + "'");
    }
    item.answers.push_back(
        CandidateAnswer{system_id, translation, human_score, std::nullopt});
  }

  if (pending.empty()) {
    throw EmptyAfterFiltering("no MT rows left after language filtering: " +
                              path.string());
  }

  std::vector<EvaluationItem> items;
  items.reserve(order.size());
  for (const auto& source_id : order) {
    PendingItem& raw = pending.at(source_id);
    EvaluationItem item(source_id, std::move(raw.source), 100.0,
                        TaskKind::Translation,
                        Language::other(raw.language_pair), std::nullopt,
                        std::move(raw.answers));
    items.push_back(dedup_identical_translations(item, dedup_stats));
  }
  return items;
}

inline std::vector<EvaluationItem> load_dataset(
    const std::filesystem::path& path, DatasetFormat format,
    const std::vector<std::string>& mt_languages = default_mt_languages(),
    DedupStats* dedup_stats = nullptr) {
  if (format == DatasetFormat::ExamJson) return load_exam_dataset(path);
  return load_mt_dataset(path, mt_languages, dedup_stats);
}

// Writers for the same two layouts; used for fixtures and round-trip checks.
inline void save_exam_dataset(const std::filesystem::path& path,
                              std::span<const EvaluationItem> items) {
  if (items.empty()) {
    throw InvalidArgument("cannot save an empty exam dataset");
  }
  std::string exam_id = items.front().id;
  if (auto slash = exam_id.find('/'); slash != std::string::npos) {
    exam_id = exam_id.substr(0, slash);
  }

  nlohmann::json questions = nlohmann::json::array();
  for (const auto& item : items) {
    std::string question_id = item.id;
    if (question_id.rfind(exam_id + "/", 0) == 0) {
      question_id = question_id.substr(exam_id.size() + 1);
    }
    nlohmann::json answers = nlohmann::json::array();
    for (const auto& answer : item.answers) {
      nlohmann::json a = {{"examinee_id", answer.id}, {"text", answer.text}};
      if (answer.human_score) a["human_score"] = *answer.human_score;
      if (answer.latent_quality) a["latent_quality"] = *answer.latent_quality;
      answers.push_back(std::move(a));
    }
    nlohmann::json q = {{"id", question_id},
                        {"text", item.prompt_text},
                        {"max_points", item.max_points},
                        {"answers", std::move(answers)}};
    if (item.difficulty) q["difficulty"] = to_string(*item.difficulty);
    questions.push_back(std::move(q));
  }

  nlohmann::json root = {{"schema_version", 1},
                         {"exam_id", exam_id},
                         {"language", items.front().language.tag},
                         {"questions", std::move(questions)}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw SchemaError("cannot write dataset file: " + path.string());
  }
  out << root.dump(2) << "\n";
}

inline void save_mt_dataset(const std::filesystem::path& path,
                            std::span<const EvaluationItem> items) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw SchemaError("cannot write dataset file: " + path.string());
  }
  out << "source_id\tlanguage_pair\tsource\ttranslation\tsystem_id\t"
         "human_score\n";
  for (const auto& item : items) {
    for (const auto& answer : item.answers) {
      out << item.id << '\t' << item.language.tag << '\t' << item.prompt_text
          << '\t' << answer.text << '\t' << answer.id << '\t'
          << (answer.human_score ? format_number(*answer.human_score) : "")
          << '\n';
    }
  }
}

}  // namespace knockout
