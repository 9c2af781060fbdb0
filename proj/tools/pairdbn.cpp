// pairdbn: simulate platooning telemetry, train pair-based DBN models, detect
// abnormalities and compare the resulting reports.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pairdbn/error.hpp"
#include "pairdbn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pairdbn;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

struct Options {
  std::string config_file;
  std::optional<std::string> scenario;
  std::optional<int> laps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> combinations;
  std::optional<double> threshold;
  std::optional<std::size_t> particles;
  std::string data_dir = "data";
  std::string models_dir = "models";
  std::string out_dir;
  std::string events;
  std::vector<std::string> reports;
};

std::vector<FeatureCombination> parse_combination_list(const std::string& text) {
  std::vector<FeatureCombination> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_combination(item));
  }
  if (out.empty()) throw ConfigError("--combinations: no combination given");
  return out;
}

// Defaults, then the config file, then flags.
RunConfig build_config(const Options& o) {
  RunConfig config;
  if (!o.config_file.empty()) apply_config_file(config, o.config_file);
  if (o.seed) config.apply_seed(*o.seed);
  if (o.scenario) config.scenario.scenario = parse_scenario(*o.scenario);
  if (o.laps) config.scenario.laps = *o.laps;
  if (o.combinations) config.combinations = parse_combination_list(*o.combinations);
  if (o.threshold) config.score.threshold = *o.threshold;
  if (o.particles) config.score.filter.particles = *o.particles;
  config.validate();
  return config;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_file, "JSON config file (flags override it)");
  cmd->add_option("--seed", o.seed, "Seed for the simulator, GNG and particle filter");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pair-based switching DBN abnormality detection for vehicle telemetry"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Generate leader/follower telemetry and event windows");
  add_common(sim, o);
  sim->add_option("--scenario", o.scenario, "perimeter or emergency-stop");
  sim->add_option("--laps", o.laps, "Laps around the rectangle");
  sim->add_option("--out-dir", o.out_dir, "Output directory (default: data)");

  auto* tr = app.add_subcommand("train", "Train one model per vehicle and feature combination");
  add_common(tr, o);
  tr->add_option("--data-dir", o.data_dir, "Directory with leader.csv and follower.csv");
  tr->add_option("--combinations", o.combinations, "Comma list, e.g. SP,VP,SV or NAME=ch1+ch2");
  tr->add_option("--models-dir", o.models_dir, "Where to write .dbn files");

  auto* det = app.add_subcommand("detect", "Score telemetry with trained models");
  add_common(det, o);
  det->add_option("--data-dir", o.data_dir, "Directory with the test telemetry");
  det->add_option("--models-dir", o.models_dir, "Directory with .dbn files");
  det->add_option("--combinations", o.combinations, "Restrict to these combinations");
  det->add_option("--threshold", o.threshold, "Abnormality threshold on theta");
  det->add_option("--particles", o.particles, "Particles per filter");
  det->add_option("--out-dir", o.out_dir, "Output directory (default: reports)");

  auto* cmp = app.add_subcommand("compare", "Rank report CSVs against event windows");
  add_common(cmp, o);
  cmp->add_option("--reports", o.reports, "Report CSV files or a directory of them")->expected(1, -1);
  cmp->add_option("--events", o.events, "Event-window sidecar (default: <data-dir>/events.csv)");
  cmp->add_option("--data-dir", o.data_dir, "Directory holding events.csv");
  cmp->add_option("--out-dir", o.out_dir, "Output directory (default: reports)");

  auto* defaults = app.add_subcommand("defaults", "Print the built-in configuration as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (defaults->parsed()) {
      std::cout << default_config_json();
      return EXIT_SUCCESS;
    }
    const RunConfig config = build_config(o);
    if (sim->parsed()) {
      const auto out = run_simulate(config, o.out_dir.empty() ? "data" : o.out_dir);
      std::cout << out.summary;
    } else if (tr->parsed()) {
      const auto out = run_train(config, o.data_dir, o.models_dir);
      std::cout << out.summary;
    } else if (det->parsed()) {
      const auto out = run_detect(config, o.data_dir, o.models_dir, o.out_dir.empty() ? "reports" : o.out_dir);
      std::cout << out.summary;
    } else if (cmp->parsed()) {
      std::vector<fs::path> reports;
      for (const auto& r : o.reports) {
        if (fs::is_directory(r)) {
          for (const auto& p : list_reports(r)) reports.push_back(p);
        } else {
          reports.emplace_back(r);
        }
      }
      if (reports.empty()) reports = list_reports(o.out_dir.empty() ? "reports" : o.out_dir);
      const fs::path events = o.events.empty() ? fs::path(o.data_dir) / kEventsFile : fs::path(o.events);
      const auto out = run_compare(reports, events, o.out_dir.empty() ? "reports" : o.out_dir);
      std::cout << out.summary;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return EXIT_SUCCESS;
}
