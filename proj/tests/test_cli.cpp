#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  fs::path log = scratch / "cli-output.txt";
  std::string command =
      "\""s + KNOCKOUT_CLI_PATH + "\" " + args + " > \"" + log.string() +
      "\" 2>&1";
  int status = std::system(command.c_str());
  CliResult result;
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  std::ifstream in(log);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  result.output = buffer.str();
  return result;
}

fs::path write_fixture(const fs::path& dir) {
  nlohmann::json root = {
      {"schema_version", 1},
      {"exam_id", "exam1"},
      {"language", "en"},
      {"questions",
       {{{"id", "q1"},
         {"text", "Define X."},
         {"max_points", 10},
         {"difficulty", "easy"},
         {"answers",
          {{{"examinee_id", "a"}, {"text", "ta"}, {"human_score", 9.0},
            {"latent_quality", 9.0}},
           {{"examinee_id", "b"}, {"text", "tb"}, {"human_score", 5.0},
            {"latent_quality", 5.0}},
           {{"examinee_id", "c"}, {"text", "tc"}, {"human_score", 3.0},
            {"latent_quality", 3.0}},
           {{"examinee_id", "d"}, {"text", "td"}, {"human_score", 1.0},
            {"latent_quality", 1.0}}}}}}}};
  fs::path path = dir / "exam.json";
  std::ofstream out(path);
  out << root.dump(2);
  return path;
}

}  // namespace

TEST_CASE("the CLI runs, reports, simulates, and manages the cache") {
  fs::path dir = fs::temp_directory_path() / "knockout-cli-e2e";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto dataset = write_fixture(dir);

  auto run = run_cli("run --dataset \"" + dataset.string() +
                         "\" --format exam-json --method knockout-debiased "
                         "--backend oracle --seed 9 --out \"" +
                         (dir / "out").string() + "\" --cache \"" +
                         (dir / "cache").string() + "\"",
                     dir);
  INFO(run.output);
  CHECK(run.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "scores.csv"));
  CHECK(fs::exists(dir / "out" / "matches.json"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));

  auto report = run_cli("report --results \"" + (dir / "out").string() +
                            "\" --dataset \"" + dataset.string() +
                            "\" --format exam-json --out \"" +
                            (dir / "report").string() +
                            "\" --groupings whole-dataset by-difficulty",
                        dir);
  INFO(report.output);
  CHECK(report.exit_code == 0);
  CHECK(fs::exists(dir / "report" / "report.json"));
  CHECK(fs::exists(dir / "report" / "report.md"));
  CHECK(fs::exists(dir / "report" / "report.csv"));

  auto simulate = run_cli(
      "simulate --answers 4 --trials 3 --seed 2 --out \"" +
          (dir / "sim").string() + "\" --methods knockout individual",
      dir);
  INFO(simulate.output);
  CHECK(simulate.exit_code == 0);
  CHECK(fs::exists(dir / "sim" / "simulation.json"));

  auto inspect = run_cli(
      "cache inspect --cache \"" + (dir / "cache").string() + "\"", dir);
  CHECK(inspect.exit_code == 0);
  CHECK(inspect.output.find("entries") != std::string::npos);

  auto clear = run_cli(
      "cache clear --cache \"" + (dir / "cache").string() + "\"", dir);
  CHECK(clear.exit_code == 0);

  fs::remove_all(dir);
}

TEST_CASE("bad CLI invocations exit nonzero with diagnostics") {
  fs::path dir = fs::temp_directory_path() / "knockout-cli-errors";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto no_dataset = run_cli("run --out \"" + (dir / "out").string() + "\"",
                            dir);
  CHECK(no_dataset.exit_code != 0);

  auto bad_method = run_cli(
      "run --dataset missing.json --method elo --out \"" +
          (dir / "out").string() + "\"",
      dir);
  CHECK(bad_method.exit_code != 0);

  auto missing_file = run_cli(
      "run --dataset \"" + (dir / "nope.json").string() +
          "\" --backend oracle --out \"" + (dir / "out").string() + "\"",
      dir);
  CHECK(missing_file.exit_code == 1);
  CHECK(missing_file.output.find("error") != std::string::npos);

  auto remote_needs_model = run_cli(
      "run --dataset nope.json --backend remote --endpoint http://x --out "
      "\"" + (dir / "out").string() + "\"",
      dir);
  CHECK(remote_needs_model.exit_code != 0);

  fs::remove_all(dir);
}
