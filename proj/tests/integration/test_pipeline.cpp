#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pairdbn/error.hpp"
#include "pairdbn/model_io.hpp"
#include "pairdbn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pairdbn;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(PAIRDBN_SCRATCH_DIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PAIRDBN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig short_run() {
  RunConfig c;
  c.scenario.laps = 1;
  return c;
}

}  // namespace

TEST_CASE("shipped config equals the built-in defaults") {
  CHECK(slurp(fs::path(PAIRDBN_SOURCE_DIR) / "config" / "default.json") == default_config_json());
  RunConfig c;
  apply_config_json(c, default_config_json());
  CHECK(c.score.threshold == 0.4);
  CHECK(c.combinations.size() == 4);
}

TEST_CASE("config overlay") {
  RunConfig c;
  apply_config_json(c, R"({"seed": 9, "detect": {"threshold": 0.3}, "combinations": ["VP"]})");
  CHECK(c.seed == 9);
  CHECK(c.scenario.seed == 9);
  CHECK(c.score.threshold == 0.3);
  REQUIRE(c.combinations.size() == 1);
  CHECK(c.combinations[0].name == "VP");
  CHECK_THROWS_AS(apply_config_json(c, R"({"detect": {"treshold": 0.3}})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(c, R"({"mystery": {}})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(c, R"({"scenario": {"laps": "four"}})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(c, R"({"combinations": ["QQ"]})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(c, "{not json"), ConfigError);
}

TEST_CASE("simulate, train, detect and compare in process") {
  const fs::path root = scratch("inprocess");
  RunConfig config = short_run();

  const auto sim = run_simulate(config, root / "train");
  CHECK(fs::exists(root / "train" / kLeaderFile));
  CHECK(fs::exists(root / "train" / kFollowerFile));
  CHECK(sim.windows.empty());

  const auto trained = run_train(config, root / "train", root / "models");
  CHECK(trained.models.size() == 8);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(root / "models")) {
    if (entry.path().extension() != ".dbn") continue;
    ++files;
    const DbnModel model = load_model(entry.path());
    for (std::size_t a = 0; a < model.dictionary_size(); ++a) {
      double row = 0.0;
      for (std::size_t b = 0; b < model.dictionary_size(); ++b) row += model.transitions.probability(a, b);
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
  }
  CHECK(files == 8);

  RunConfig test = config;
  test.scenario.scenario = Scenario::EmergencyStop;
  test.scenario.laps = 2;
  test.scenario.event_time_s = 60.0;
  test.scenario.seed = 2;
  const auto stop = run_simulate(test, root / "test");
  CHECK(stop.windows.size() >= 2);

  test.combinations = {parse_combination("VP"), parse_combination("SV")};
  const auto detected = run_detect(test, root / "test", root / "models", root / "reports");
  CHECK(detected.reports.size() == 4);
  for (const auto& r : detected.reports) {
    CHECK(fs::exists(r.report_path));
    CHECK(fs::exists(r.summary_path));
  }

  const auto one = run_compare({root / "reports" / "leader_VP.csv"}, root / "test" / kEventsFile, root / "cmp1");
  CHECK(one.table.rows.size() == 2);
  const auto all = run_compare(list_reports(root / "reports"), root / "test" / kEventsFile, root / "cmp");
  CHECK(all.table.rows.size() == 4);
  CHECK(fs::exists(all.table_path));

  SUBCASE("unknown channel fails before training") {
    RunConfig bad = config;
    CHECK_THROWS_AS(bad.combinations = {parse_combination("Z=velocity+torque")}, ConfigError);
  }
  SUBCASE("missing channel in the test telemetry") {
    const fs::path broken = root / "broken";
    fs::create_directories(broken);
    for (const char* name : {kLeaderFile, kFollowerFile}) {
      std::ifstream in(root / "test" / name);
      std::ofstream out(broken / name);
      std::string line;
      while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
    }
    CHECK_THROWS(run_detect(test, broken, root / "models", root / "broken_reports"));
  }
  SUBCASE("too little training data") {
    const fs::path tiny = root / "tiny";
    fs::create_directories(tiny);
    for (const char* name : {kLeaderFile, kFollowerFile}) {
      std::ifstream in(root / "train" / name);
      std::ofstream out(tiny / name);
      std::string line;
      for (int k = 0; k < 20 && std::getline(in, line); ++k) out << line << '\n';
    }
    CHECK_THROWS_AS(run_train(config, tiny, root / "tiny_models"), DataError);
  }
}

TEST_CASE("command line exit codes and reproducibility") {
  const fs::path root = scratch("cli");
  const std::string d = root.string();

  CHECK(run_cli("defaults") == 0);
  CHECK(run_cli("") == 1);
  CHECK(run_cli("simulate --laps nope") == 1);
  CHECK(run_cli("train --combinations QQ --data-dir " + d + "/none") == 1);
  {
    std::ofstream bad(root / "bad.json");
    bad << R"({"gng": {"max_nodes": 1}})";
  }
  CHECK(run_cli("simulate --config " + d + "/bad.json --out-dir " + d + "/x") == 1);
  CHECK(run_cli("train --data-dir " + d + "/missing --models-dir " + d + "/m") == 2);

  for (const char* run : {"a", "b"}) {
    const std::string r = d + "/" + run;
    REQUIRE(run_cli("simulate --laps 1 --seed 7 --out-dir " + r + "/train") == 0);
    REQUIRE(run_cli("train --seed 7 --data-dir " + r + "/train --models-dir " + r + "/models") == 0);
    REQUIRE(run_cli("simulate --scenario emergency-stop --seed 8 --out-dir " + r + "/test") == 0);
    REQUIRE(run_cli("detect --seed 7 --combinations VP,SV --data-dir " + r + "/test --models-dir " + r +
                    "/models --out-dir " + r + "/reports") == 0);
    REQUIRE(run_cli("compare --reports " + r + "/reports --data-dir " + r + "/test --out-dir " + r + "/reports") == 0);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path other = root / "b" / fs::relative(entry.path(), root / "a");
    CHECK_MESSAGE(slurp(entry.path()) == slurp(other), entry.path().string());
    ++compared;
  }
  CHECK(compared == 3 + 8 + 3 + 4 * 2 + 1);
}
