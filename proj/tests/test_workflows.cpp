#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "knockout/runner.hpp"

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

// Four answers whose latent qualities double as human scores; with a
// noiseless oracle every method recovers them exactly.
fs::path write_exam_fixture(const fs::path& path, bool with_difficulty = true) {
  nlohmann::json answers = nlohmann::json::array();
  const char* ids[] = {"alice", "bob", "carol", "dave"};
  const double latents[] = {9.0, 7.0, 5.0, 3.0};
  for (int i = 0; i < 4; ++i) {
    answers.push_back({{"examinee_id", ids[i]},
                       {"text", std::string("answer by ") + ids[i]},
                       {"human_score", latents[i]},
                       {"latent_quality", latents[i]}});
  }
  nlohmann::json question = {{"id", "q1"},
                             {"text", "Define X."},
                             {"max_points", 10},
                             {"answers", std::move(answers)}};
  if (with_difficulty) question["difficulty"] = "medium";
  nlohmann::json root = {{"schema_version", 1},
                         {"exam_id", "exam1"},
                         {"language", "en"},
                         {"questions", nlohmann::json::array({question})}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << root.dump(2);
  return path;
}

RunConfig base_run_config(const fs::path& dataset, const fs::path& out,
                          Method method) {
  RunConfig config;
  config.dataset_path = dataset;
  config.format = DatasetFormat::ExamJson;
  config.method = method;
  config.seed = 7;
  config.out_dir = out;
  config.judge.backend = BackendKind::SimulatedOracle;
  config.judge.oracle_seed = 7;
  return config;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

}  // namespace

TEST_CASE("cmd_run writes scores, matches, and a manifest") {
  TempDir dir("knockout-run-knockout");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  auto config = base_run_config(dataset, dir.path / "out", Method::Knockout);

  std::ostringstream log;
  CHECK(cmd_run(config, log) == kExitOk);

  auto rows = read_scores_csv(dir.path / "out" / "scores.csv");
  CHECK(rows.size() == 4);
  for (const auto& row : rows) {
    REQUIRE(row.final_score.has_value());
    CHECK(row.n_scores >= 1);
  }

  auto matches = nlohmann::json::parse(slurp(dir.path / "out" /
                                             "matches.json"));
  CHECK(matches.size() == 3);

  auto manifest = nlohmann::json::parse(slurp(dir.path / "out" /
                                              "manifest.json"));
  CHECK(manifest["judge_call_count"] == 3);
  CHECK(manifest["backend_calls"] == 3);
  CHECK(manifest["method"] == "knockout");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["scored_answers"] == 4);
  CHECK(manifest["unscorable_items"].empty());
  CHECK(manifest["template_hashes"].size() == 6);
}

TEST_CASE("cmd_run with the individual method issues one call per answer") {
  TempDir dir("knockout-run-individual");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  auto config = base_run_config(dataset, dir.path / "out", Method::Individual);
  std::ostringstream log;
  CHECK(cmd_run(config, log) == kExitOk);
  auto manifest = nlohmann::json::parse(slurp(dir.path / "out" /
                                              "manifest.json"));
  CHECK(manifest["judge_call_count"] == 4);
}

TEST_CASE("an unusable output directory fails before any work") {
  TempDir dir("knockout-run-unwritable");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  auto blocker = dir.path / "blocker";
  {
    std::ofstream out(blocker);
    out << "a file, not a directory";
  }
  // The output path's parent is a regular file, so it cannot be created.
  auto config =
      base_run_config(dataset, blocker / "out", Method::Knockout);
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_run(config, log), Error);
  CHECK_FALSE(fs::exists(blocker / "out"));
}

TEST_CASE("cmd_report compares methods side by side") {
  TempDir dir("knockout-report");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  std::ostringstream log;
  auto knockout_config =
      base_run_config(dataset, dir.path / "ko", Method::Knockout);
  auto individual_config =
      base_run_config(dataset, dir.path / "ind", Method::Individual);
  REQUIRE(cmd_run(knockout_config, log) == kExitOk);
  REQUIRE(cmd_run(individual_config, log) == kExitOk);

  ReportConfig report;
  report.results_dirs = {dir.path / "ko", dir.path / "ind"};
  report.dataset_path = dataset;
  report.format = DatasetFormat::ExamJson;
  report.out_dir = dir.path / "report";
  CHECK(cmd_report(report) == kExitOk);

  auto doc = nlohmann::json::parse(slurp(dir.path / "report" /
                                         "report.json"));
  REQUIRE(doc["overview"].size() == 2);
  // Noiseless oracle: both methods correlate perfectly.
  for (const auto& row : doc["overview"]) {
    CHECK(row["cells"]["whole-dataset"] == 1.0);
  }
  CHECK(fs::exists(dir.path / "report" / "report.md"));
  CHECK(fs::exists(dir.path / "report" / "report.csv"));

  // Markdown numbers mirror the JSON values.
  auto markdown = slurp(dir.path / "report" / "report.md");
  CHECK(markdown.find("| knockout |") != std::string::npos);
  CHECK(markdown.find("| individual |") != std::string::npos);
}

TEST_CASE("difficulty groupings demand labeled items") {
  TempDir dir("knockout-report-difficulty");
  auto dataset =
      write_exam_fixture(dir.path / "exam.json", /*with_difficulty=*/false);
  std::ostringstream log;
  auto config = base_run_config(dataset, dir.path / "out", Method::Knockout);
  REQUIRE(cmd_run(config, log) == kExitOk);

  ReportConfig report;
  report.results_dirs = {dir.path / "out"};
  report.dataset_path = dataset;
  report.out_dir = dir.path / "report";
  report.groupings = {GroupingKind::ByDifficulty};
  CHECK_THROWS_AS(cmd_report(report), MissingLabel);
}

TEST_CASE("difficulty and language groupings are refused for MT data") {
  TempDir dir("knockout-report-mt");
  ReportConfig report;
  report.results_dirs = {dir.path};
  report.dataset_path = dir.path / "mt.tsv";
  report.format = DatasetFormat::MtTsv;
  report.out_dir = dir.path / "report";
  report.groupings = {GroupingKind::ByDifficulty};
  CHECK_THROWS_AS(cmd_report(report), MissingLabel);
}

TEST_CASE("orphaned score rows are an IdMismatch") {
  TempDir dir("knockout-report-orphans");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  std::ostringstream log;
  auto config = base_run_config(dataset, dir.path / "out", Method::Knockout);
  REQUIRE(cmd_run(config, log) == kExitOk);

  // Tamper with an answer id so it no longer matches the dataset.
  auto csv = slurp(dir.path / "out" / "scores.csv");
  auto pos = csv.find("alice");
  REQUIRE(pos != std::string::npos);
  csv.replace(pos, 5, "edith");
  {
    std::ofstream out(dir.path / "out" / "scores.csv",
                      std::ios::binary | std::ios::trunc);
    out << csv;
  }

  ReportConfig report;
  report.results_dirs = {dir.path / "out"};
  report.dataset_path = dataset;
  report.out_dir = dir.path / "report";
  try {
    cmd_report(report);
    FAIL("expected IdMismatch");
  } catch (const IdMismatch& err) {
    REQUIRE(err.orphans.size() == 1);
    CHECK(err.orphans[0] == "exam1/q1/edith");
  }
}

TEST_CASE("warm cache replays a run byte-for-byte with zero backend calls") {
  TempDir dir("knockout-replay");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  auto config =
      base_run_config(dataset, dir.path / "out1", Method::KnockoutDebiased);
  config.cache_dir = dir.path / "cache";

  std::ostringstream log;
  REQUIRE(cmd_run(config, log) == kExitOk);
  auto first_scores = slurp(dir.path / "out1" / "scores.csv");
  auto first_matches = slurp(dir.path / "out1" / "matches.json");

  config.out_dir = dir.path / "out2";
  REQUIRE(cmd_run(config, log) == kExitOk);
  CHECK(slurp(dir.path / "out2" / "scores.csv") == first_scores);
  CHECK(slurp(dir.path / "out2" / "matches.json") == first_matches);

  auto manifest = nlohmann::json::parse(slurp(dir.path / "out2" /
                                              "manifest.json"));
  CHECK(manifest["backend_calls"] == 0);
  CHECK(manifest["cache"]["hits"] == 6);
  CHECK(manifest["judge_call_count"] == 6);
}

TEST_CASE("missing latent qualities abort an oracle run outright") {
  TempDir dir("knockout-missing-latents");
  nlohmann::json root = {
      {"schema_version", 1},
      {"exam_id", "exam1"},
      {"language", "en"},
      {"questions",
       {{{"id", "bad"},
         {"text", "Q2"},
         {"max_points", 10},
         {"answers",
          // No latent_quality: the oracle cannot score this item.
          {{{"examinee_id", "c"}, {"text", "tc"}},
           {{"examinee_id", "d"}, {"text", "td"}}}}}}}};
  auto dataset = dir.path / "exam.json";
  {
    std::ofstream out(dataset);
    out << root.dump(2);
  }
  auto config = base_run_config(dataset, dir.path / "out", Method::Knockout);
  std::ostringstream log;
  // A data/config mismatch is a hard failure, not a parse degradation.
  CHECK_THROWS_AS(cmd_run(config, log), MissingLatentQuality);
}

TEST_CASE("unscorable items degrade to exit 2 with partial results") {
  TempDir dir("knockout-partial");
  nlohmann::json root = {
      {"schema_version", 1},
      {"exam_id", "exam1"},
      {"language", "en"},
      {"questions",
       {{{"id", "good"},
         {"text", "gradable question"},
         {"max_points", 10},
         {"answers",
          {{{"examinee_id", "a"}, {"text", "ta"}, {"human_score", 8.0}},
           {{"examinee_id", "b"}, {"text", "tb"}, {"human_score", 4.0}}}}},
        {{"id", "bad"},
         {"text", "refused question"},
         {"max_points", 10},
         {"answers",
          {{{"examinee_id", "c"}, {"text", "tc"}, {"human_score", 6.0}},
           {{"examinee_id", "d"}, {"text", "td"}, {"human_score", 2.0}}}}}}}};
  auto dataset = dir.path / "exam.json";
  {
    std::ofstream out(dataset);
    out << root.dump(2);
  }

  // The judge answers the gradable question and refuses the other one.
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req,
                                         httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    std::string prompt = body["messages"][0]["content"];
    std::string text = prompt.find("gradable question") != std::string::npos
                           ? "Explanation: ok.  Answer 1: 8/10  Answer 2: 4/10"
                           : "I refuse to grade this.";
    nlohmann::json reply = {
        {"choices",
         nlohmann::json::array(
             {{{"message", {{"role", "assistant"}, {"content", text}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  RunConfig config;
  config.dataset_path = dataset;
  config.format = DatasetFormat::ExamJson;
  config.method = Method::Knockout;
  config.seed = 7;
  config.out_dir = dir.path / "out";
  config.max_parse_retries = 1;
  config.judge.backend = BackendKind::Remote;
  config.judge.model_id = "stub";
  config.judge.endpoint_url = "http://127.0.0.1:" + std::to_string(port) +
                              "/v1";
  config.judge.backoff_base_ms = 1;

  std::ostringstream log;
  int status = cmd_run(config, log);
  server.stop();
  server_thread.join();

  CHECK(status == kExitPartial);
  CHECK(log.str().find("exam1/bad") != std::string::npos);
  auto rows = read_scores_csv(dir.path / "out" / "scores.csv");
  CHECK(rows.size() == 2);  // the good item's answers
  auto manifest = nlohmann::json::parse(slurp(dir.path / "out" /
                                              "manifest.json"));
  REQUIRE(manifest["unscorable_items"].size() == 1);
  CHECK(manifest["unscorable_items"][0] == "exam1/bad");
}

TEST_CASE("cmd_simulate writes a method comparison") {
  TempDir dir("knockout-simulate");
  SimulateConfig config;
  config.n_answers = 4;
  config.trials = 5;
  config.seed = 3;
  CHECK(cmd_simulate(config, dir.path / "sim") == kExitOk);

  auto doc = nlohmann::json::parse(slurp(dir.path / "sim" /
                                         "simulation.json"));
  REQUIRE(doc["methods"].size() == 4);
  for (const auto& row : doc["methods"]) {
    // Noiseless, unbiased oracle: every method recovers the latents.
    CHECK(row["mean_pearson"] == 1.0);
    CHECK(row["trials_counted"] == 5);
  }
  CHECK(fs::exists(dir.path / "sim" / "simulation.md"));
  CHECK(fs::exists(dir.path / "sim" / "simulation.csv"));
}

TEST_CASE("simulation applies noise and bias knobs") {
  SimulateConfig config;
  config.n_answers = 8;
  config.trials = 20;
  config.sigma = 0.0;
  config.bias = 1.0;
  config.latent_high = 9.0;  // headroom so the +1 bias cannot clamp
  config.seed = 11;
  config.methods = {Method::Knockout, Method::KnockoutDebiased};
  auto summary = run_simulation(config);

  const auto& biased = summary.summary_for(Method::Knockout);
  const auto& debiased = summary.summary_for(Method::KnockoutDebiased);
  CHECK(debiased.mean_pearson == Catch::Approx(1.0).margin(1e-9));
  CHECK(biased.mean_pearson < debiased.mean_pearson);
  CHECK(debiased.judge_calls == 2 * biased.judge_calls);
}

TEST_CASE("cache inspect and clear commands run") {
  TempDir dir("knockout-cache-cmd");
  auto dataset = write_exam_fixture(dir.path / "exam.json");
  auto config = base_run_config(dataset, dir.path / "out", Method::Knockout);
  config.cache_dir = dir.path / "cache";
  std::ostringstream log;
  REQUIRE(cmd_run(config, log) == kExitOk);

  std::ostringstream out;
  CHECK(cmd_cache_inspect(dir.path / "cache", out) == kExitOk);
  auto stats = nlohmann::json::parse(out.str());
  CHECK(stats["entries"] == 3);

  std::ostringstream clear_out;
  CHECK(cmd_cache_clear(dir.path / "cache", clear_out) == kExitOk);
  std::ostringstream out2;
  CHECK(cmd_cache_inspect(dir.path / "cache", out2) == kExitOk);
  CHECK(nlohmann::json::parse(out2.str())["entries"] == 0);
}
