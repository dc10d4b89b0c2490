#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "knockout/dataset.hpp"

using namespace knockout;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  return path;
}

nlohmann::json minimal_exam() {
  return nlohmann::json{
      {"schema_version", 1},
      {"exam_id", "exam1"},
      {"language", "en"},
      {"questions",
       {{{"id", "q1"},
         {"text", "Define X."},
         {"max_points", 10},
         {"difficulty", "easy"},
         {"answers",
          {{{"examinee_id", "alice"}, {"text", "Answer A"},
            {"human_score", 7.5}},
           {{"examinee_id", "bob"}, {"text", "Answer B"},
            {"human_score", 4.0}}}}}}}};
}

const std::string kMtHeader =
    "source_id\tlanguage_pair\tsource\ttranslation\tsystem_id\thuman_score\n";

}  // namespace

TEST_CASE("a minimal exam file loads into one item") {
  TempDir dir("knockout-exam-min");
  auto path = write_file(dir.path / "exam.json", minimal_exam().dump());
  auto items = load_exam_dataset(path);
  REQUIRE(items.size() == 1);
  const auto& item = items[0];
  CHECK(item.id == "exam1/q1");
  CHECK(item.max_points == 10.0);
  CHECK(item.task_kind == TaskKind::ExamGrading);
  CHECK(item.language == Language::english());
  REQUIRE(item.difficulty.has_value());
  CHECK(*item.difficulty == Difficulty::Easy);
  REQUIRE(item.answers.size() == 2);
  CHECK(item.answers[0].id == "alice");
  CHECK(item.answers[0].human_score == 7.5);
}

TEST_CASE("schema violations name the offending field") {
  TempDir dir("knockout-exam-bad");

  auto missing_max = minimal_exam();
  missing_max["questions"][0].erase("max_points");
  auto path = write_file(dir.path / "a.json", missing_max.dump());
  CHECK_THROWS_WITH(load_exam_dataset(path),
                    Catch::Matchers::ContainsSubstring("max_points"));

  auto bad_difficulty = minimal_exam();
  bad_difficulty["questions"][0]["difficulty"] = "impossible";
  path = write_file(dir.path / "b.json", bad_difficulty.dump());
  CHECK_THROWS_AS(load_exam_dataset(path), SchemaError);

  auto bad_version = minimal_exam();
  bad_version["schema_version"] = 2;
  path = write_file(dir.path / "c.json", bad_version.dump());
  CHECK_THROWS_AS(load_exam_dataset(path), SchemaError);

  auto score_out_of_scale = minimal_exam();
  score_out_of_scale["questions"][0]["answers"][0]["human_score"] = 11;
  path = write_file(dir.path / "d.json", score_out_of_scale.dump());
  CHECK_THROWS_AS(load_exam_dataset(path), SchemaError);

  path = write_file(dir.path / "e.json", "{ not json");
  CHECK_THROWS_AS(load_exam_dataset(path), SchemaError);

  CHECK_THROWS_AS(load_exam_dataset(dir.path / "missing.json"), SchemaError);
}

TEST_CASE("duplicate examinee ids are rejected") {
  TempDir dir("knockout-exam-dup");
  auto doc = minimal_exam();
  doc["questions"][0]["answers"][1]["examinee_id"] = "alice";
  auto path = write_file(dir.path / "exam.json", doc.dump());
  CHECK_THROWS_AS(load_exam_dataset(path), DuplicateAnswerId);
}

TEST_CASE("mt rows group by source sentence") {
  TempDir dir("knockout-mt-group");
  auto path = write_file(dir.path / "mt.tsv",
                         kMtHeader +
                             "s1\ten-de\tHello\tHallo\tsysA\t70\n"
                             "s1\ten-de\tHello\tGuten Tag\tsysB\t80\n"
                             "s2\ten-de\tBye\tTschüss\tsysA\t90\n");
  auto items = load_mt_dataset(path);
  REQUIRE(items.size() == 2);
  CHECK(items[0].id == "s1");
  CHECK(items[0].answers.size() == 2);
  CHECK(items[0].max_points == 100.0);
  CHECK(items[0].task_kind == TaskKind::Translation);
  CHECK(items[1].answers.size() == 1);
}

TEST_CASE("mt rows outside the language filter are dropped") {
  TempDir dir("knockout-mt-lang");
  auto path = write_file(dir.path / "mt.tsv",
                         kMtHeader +
                             "s1\ten-de\tHello\tHallo\tsysA\t70\n"
                             "s2\ten-ja\tHello\tkonnichiwa\tsysA\t75\n");
  auto items = load_mt_dataset(path);  // default filter has no "ja"
  REQUIRE(items.size() == 1);
  CHECK(items[0].id == "s1");

  auto everything = load_mt_dataset(path, {"en", "de", "ja"});
  CHECK(everything.size() == 2);

  auto path2 = write_file(dir.path / "mt2.tsv",
                          kMtHeader + "s1\ten-ja\tHello\tkon\tsysA\t75\n");
  CHECK_THROWS_AS(load_mt_dataset(path2), EmptyAfterFiltering);
}

TEST_CASE("mt scores beyond 0..100 are schema errors") {
  TempDir dir("knockout-mt-range");
  auto path = write_file(dir.path / "mt.tsv",
                         kMtHeader + "s1\ten-de\tHello\tHallo\tsysA\t101\n");
  CHECK_THROWS_AS(load_mt_dataset(path), SchemaError);
}

TEST_CASE("identical translations deduplicate, first score wins") {
  EvaluationItem item("s1", "Hello", 100.0, TaskKind::Translation,
                      Language::other("en-de"), std::nullopt,
                      {{"sysA", "Hallo", 70.0, std::nullopt},
                       {"sysB", "Hallo", 80.0, std::nullopt}});
  DedupStats stats;
  auto deduped = dedup_identical_translations(item, &stats);
  REQUIRE(deduped.answers.size() == 1);
  CHECK(deduped.answers[0].id == "sysA");
  CHECK(deduped.answers[0].human_score == 70.0);
  CHECK(stats.removed == 1);
  CHECK(stats.conflicts == 1);
}

TEST_CASE("dedup leaves distinct answers alone and is idempotent") {
  EvaluationItem distinct("s1", "Hello", 100.0, TaskKind::Translation,
                          Language::other("en-de"), std::nullopt,
                          {{"sysA", "Hallo", 70.0, std::nullopt},
                           {"sysB", "Guten Tag", 80.0, std::nullopt}});
  CHECK(dedup_identical_translations(distinct) == distinct);

  EvaluationItem tripled("s1", "Hello", 100.0, TaskKind::Translation,
                         Language::other("en-de"), std::nullopt,
                         {{"a", "Hallo", 70.0, std::nullopt},
                          {"b", "Hallo", 70.0, std::nullopt},
                          {"c", "Hallo", 75.0, std::nullopt},
                          {"d", "Servus", 60.0, std::nullopt}});
  DedupStats stats;
  auto once = dedup_identical_translations(tripled, &stats);
  CHECK(once.answers.size() == 2);
  CHECK(stats.removed == 2);
  CHECK(stats.conflicts == 1);  // only "c" disagreed with the kept score
  CHECK(dedup_identical_translations(once) == once);

  EvaluationItem exam("e/q", "Q", 10.0, TaskKind::ExamGrading,
                      Language::english(), std::nullopt, {});
  CHECK_THROWS_AS(dedup_identical_translations(exam), InvalidArgument);
}

TEST_CASE("the mt loader applies dedup") {
  TempDir dir("knockout-mt-dedup");
  auto path = write_file(dir.path / "mt.tsv",
                         kMtHeader +
                             "s1\ten-de\tHello\tHallo\tsysA\t70\n"
                             "s1\ten-de\tHello\tHallo\tsysB\t80\n");
  DedupStats stats;
  auto items = load_mt_dataset(path, default_mt_languages(), &stats);
  REQUIRE(items.size() == 1);
  CHECK(items[0].answers.size() == 1);
  CHECK(stats.removed == 1);
  CHECK(stats.conflicts == 1);
}

TEST_CASE("exam datasets round-trip through save and load") {
  TempDir dir("knockout-exam-roundtrip");
  auto path = write_file(dir.path / "exam.json", minimal_exam().dump());
  auto items = load_exam_dataset(path);

  auto saved = dir.path / "saved.json";
  save_exam_dataset(saved, items);
  auto reloaded = load_exam_dataset(saved);
  CHECK(reloaded == items);
}

TEST_CASE("mt datasets round-trip through save and load") {
  TempDir dir("knockout-mt-roundtrip");
  auto path = write_file(dir.path / "mt.tsv",
                         kMtHeader +
                             "s1\ten-de\tHello\tHallo\tsysA\t70\n"
                             "s1\ten-de\tHello\tGuten Tag\tsysB\t80.5\n"
                             "s2\ten-de\tBye\tTschüss\tsysA\t90\n");
  auto items = load_mt_dataset(path);
  auto saved = dir.path / "saved.tsv";
  save_mt_dataset(saved, items);
  CHECK(load_mt_dataset(saved) == items);
}

TEST_CASE("malformed mt files are rejected") {
  TempDir dir("knockout-mt-bad");
  auto bad_header = write_file(dir.path / "a.tsv",
                               "id\tlang\tsource\ttranslation\n");
  CHECK_THROWS_AS(load_mt_dataset(bad_header), SchemaError);

  auto short_row = write_file(dir.path / "b.tsv",
                              kMtHeader + "s1\ten-de\tHello\n");
  CHECK_THROWS_AS(load_mt_dataset(short_row), SchemaError);

  auto bad_score = write_file(
      dir.path / "c.tsv", kMtHeader + "s1\ten-de\tHello\tHallo\tsysA\tabc\n");
  CHECK_THROWS_AS(load_mt_dataset(bad_score), SchemaError);

  auto dup_system = write_file(dir.path / "d.tsv",
                               kMtHeader +
                                   "s1\ten-de\tHello\tHallo\tsysA\t70\n"
                                   "s1\ten-de\tHello\tHi\tsysA\t60\n");
  CHECK_THROWS_AS(load_mt_dataset(dup_system), DuplicateAnswerId);

  auto inconsistent = write_file(dir.path / "e.tsv",
                                 kMtHeader +
                                     "s1\ten-de\tHello\tHallo\tsysA\t70\n"
                                     "s1\ten-de\tDifferent\tHi\tsysB\t60\n");
  CHECK_THROWS_AS(load_mt_dataset(inconsistent), SchemaError);
}
