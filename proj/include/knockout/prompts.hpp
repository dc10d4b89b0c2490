#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "knockout/domain.hpp"
#include "knockout/errors.hpp"
#include "knockout/util.hpp"

namespace knockout {

enum class TemplateKind {
  IndividualExamEN,
  PairwiseExamEN,
  IndividualExamDE,
  PairwiseExamDE,
  IndividualMT,
  PairwiseMT,
};

inline constexpr std::array<TemplateKind, 6> kAllTemplateKinds = {
    TemplateKind::IndividualExamEN, TemplateKind::PairwiseExamEN,
    TemplateKind::IndividualExamDE, TemplateKind::PairwiseExamDE,
    TemplateKind::IndividualMT,     TemplateKind::PairwiseMT,
};

inline const char* template_name(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::IndividualExamEN: return "individual_exam_en";
    case TemplateKind::PairwiseExamEN: return "pairwise_exam_en";
    case TemplateKind::IndividualExamDE: return "individual_exam_de";
    case TemplateKind::PairwiseExamDE: return "pairwise_exam_de";
    case TemplateKind::IndividualMT: return "individual_mt";
    case TemplateKind::PairwiseMT: return "pairwise_mt";
  }
  return "individual_exam_en";
}

inline bool is_pairwise(TemplateKind kind) {
  return kind == TemplateKind::PairwiseExamEN ||
         kind == TemplateKind::PairwiseExamDE ||
         kind == TemplateKind::PairwiseMT;
}

inline bool is_translation(TemplateKind kind) {
  return kind == TemplateKind::IndividualMT ||
         kind == TemplateKind::PairwiseMT;
}

inline bool is_german(TemplateKind kind) {
  return kind == TemplateKind::IndividualExamDE ||
         kind == TemplateKind::PairwiseExamDE;
}

// Exam items in German use the German templates; everything else gets the
// English ones. MT items always use the MT templates.
inline TemplateKind template_kind_for(const EvaluationItem& item,
                                      bool pairwise) {
  if (item.task_kind == TaskKind::Translation) {
    return pairwise ? TemplateKind::PairwiseMT : TemplateKind::IndividualMT;
  }
  if (item.language.code == Language::Code::German) {
    return pairwise ? TemplateKind::PairwiseExamDE
                    : TemplateKind::IndividualExamDE;
  }
  return pairwise ? TemplateKind::PairwiseExamEN
                  : TemplateKind::IndividualExamEN;
}

namespace detail {

// Grading prompt bodies. Placeholders use a single {name} syntax; everything
// else is reproduced verbatim, including the odd spacing and typos the judge
// models were actually shown.
inline constexpr const char* kIndividualExamEN =
    R"(You are a university professor exam grader. Grade the following answer on a scale of 0 to {maxpoints} (allowing half points) based on its correctness and relevancy given the following question.

The Question: {question}

The Answer: {answer1}

Give your grade in the format: Explanation: [explanation]  Score: [score]/{maxpoints})";

inline constexpr const char* kPairwiseExamEN =
    R"(You are a university professor exam grader. Grader the following answers on a scale of 0 to {maxpoints} (allowing half points) based on how well they answer the question.

The Question: {question}

Answer 1: {answer1}

Answer 2: {answer2}

Grade the 2 answers on a scale of 0 to {maxpoints} (Half points such as 0.5 or 1.5 are allowed.) in the format: Explanation: [explanation]  Answer 1: X/{maxpoints}  Answer 2: Y/{maxpoints})";

inline constexpr const char* kIndividualExamDE =
    R"(Sie sind ein Universitätsprofessor. Bewerten Sie die folgende Antwort auf die unten stehende Frage. Geben Sie eine Punktzahl von 0 bis {maxpoints} basierend auf Korrektheit und Relevanz an.

Die Frage: {question}

Die Antwort: {answer1}

Bewerten Sie die Antworte auf einer Skala von 0 bis {maxpoints} (halbe Punkte wie 0,5 oder 1,5 sind erlaubt) im Format: Begründung:[begründung]   Punktzahl: X/{maxpoints})";

inline constexpr const char* kPairwiseExamDE =
    R"(Sie sind ein Universitätsprofessor und bewerten Prüfungsantworten. Bewerten Sie die folgenden Antworten auf einer Skala von 0 bis {maxpoints} (halbe Punkte sind erlaubt) basierend darauf, wie gut sie die Frage beantworten.

Die Frage: {question}

Antwort 1: {answer1}

Antwort 2: {answer2}

Bewerten Sie die beiden Antworten auf einer Skala von 0 bis {maxpoints} (halbe Punkte wie 0,5 oder 1,5 sind erlaubt) im Format: Begründung: [begründung]   Antwort 1: X/{maxpoints} Antwort 2: Y/{maxpoints}.)";

inline constexpr const char* kIndividualMT =
    R"(You are a translation evaluator. Evaluate the quality of the translation provided. Give a score from 0 to 100 based on clarity, accuracy and grammar.

Source: {source}

Translation: {tgt}

Output only: : Explanation: [explanation]  Score: [score]/100)";

inline constexpr const char* kPairwiseMT =
    R"(You are a translation evaluator. Your task is to evaluate the quality of two translations for a given source sentence. You will provide a score from 0 to 100, based solely on clarity, accuracy and grammar of the translations.

Source: {source}

Translation 1: {tgt1}

Translation 2: {tgt2}

Output only:  Explanation: [explanation]    Translation 1: [score]/100   Translation 2: [score]/100)";

inline const char* embedded_body(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::IndividualExamEN: return kIndividualExamEN;
    case TemplateKind::PairwiseExamEN: return kPairwiseExamEN;
    case TemplateKind::IndividualExamDE: return kIndividualExamDE;
    case TemplateKind::PairwiseExamDE: return kPairwiseExamDE;
    case TemplateKind::IndividualMT: return kIndividualMT;
    case TemplateKind::PairwiseMT: return kPairwiseMT;
  }
  return kIndividualExamEN;
}

// Single pass over the template. Values are inserted as-is and never
// re-scanned, so braces inside answer text cannot be mistaken for
// placeholders.
inline std::string substitute(
    std::string_view body, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(body.size() + 256);
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t open = body.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(body.substr(pos));
      break;
    }
    std::size_t close = body.find('}', open + 1);
    if (close == std::string_view::npos) {
      throw TemplateMismatch("unterminated placeholder in prompt template");
    }
    out.append(body.substr(pos, open - pos));
    std::string name(body.substr(open + 1, close - open - 1));
    auto it = values.find(name);
    if (it == values.end()) {
      throw TemplateMismatch("unresolved placeholder '{" + name +
                             "}' in prompt template");
    }
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

}  // namespace detail

// Holds the six grading-prompt bodies: embedded defaults, optionally
// overridden from a directory of UTF-8 files named <template_name>.txt.
class PromptLibrary {
 public:
  PromptLibrary() {
    for (TemplateKind kind : kAllTemplateKinds) {
      bodies_[index(kind)] = detail::embedded_body(kind);
    }
  }

  void load_overrides(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
      throw InvalidArgument("prompt directory does not exist: " +
                            dir.string());
    }
    for (TemplateKind kind : kAllTemplateKinds) {
      auto file = dir / (std::string(template_name(kind)) + ".txt");
      if (!std::filesystem::exists(file)) continue;
      std::ifstream in(file, std::ios::binary);
      if (!in) {
        throw InvalidArgument("cannot read prompt override: " +
                              file.string());
      }
      std::ostringstream buffer;
      buffer << in.rdbuf();
      bodies_[index(kind)] = buffer.str();
    }
  }

  const std::string& body(TemplateKind kind) const {
    return bodies_[index(kind)];
  }

  std::uint64_t body_hash(TemplateKind kind) const {
    return fnv1a64(bodies_[index(kind)]);
  }

  std::string render(TemplateKind kind, const EvaluationItem& item,
                     const CandidateAnswer& first,
                     const CandidateAnswer* second = nullptr) const {
    if (is_pairwise(kind) && second == nullptr) {
      throw TemplateMismatch("pairwise template '" +
                             std::string(template_name(kind)) +
                             "' needs a second answer");
    }
    if (!is_pairwise(kind) && second != nullptr) {
      throw TemplateMismatch("individual template '" +
                             std::string(template_name(kind)) +
                             "' takes a single answer");
    }
    if (is_translation(kind) != (item.task_kind == TaskKind::Translation)) {
      throw TemplateMismatch("template '" +
                             std::string(template_name(kind)) +
                             "' does not match the item task kind");
    }
    if (item.task_kind == TaskKind::ExamGrading &&
        is_german(kind) != (item.language.code == Language::Code::German)) {
      throw TemplateMismatch("template '" +
                             std::string(template_name(kind)) +
                             "' does not match the item language");
    }

    std::map<std::string, std::string> values;
    values["question"] = item.prompt_text;
    values["source"] = item.prompt_text;
    values["maxpoints"] = format_number(item.max_points);
    values["answer1"] = first.text;
    values["tgt"] = first.text;
    values["tgt1"] = first.text;
    if (second != nullptr) {
      values["answer2"] = second->text;
      values["tgt2"] = second->text;
    }
    return detail::substitute(bodies_[index(kind)], values);
  }

 private:
  static std::size_t index(TemplateKind kind) {
    return static_cast<std::size_t>(kind);
  }

  std::array<std::string, 6> bodies_;
};

inline const PromptLibrary& default_prompts() {
  static const PromptLibrary library;
  return library;
}

inline std::string render_prompt(TemplateKind kind, const EvaluationItem& item,
                                 const CandidateAnswer& first,
                                 const CandidateAnswer* second = nullptr) {
  return default_prompts().render(kind, item, first, second);
}

}  // namespace knockout
