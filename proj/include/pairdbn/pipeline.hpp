#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pairdbn/abnormality.hpp"
#include "pairdbn/sim.hpp"
#include "pairdbn/telemetry.hpp"
#include "pairdbn/vocabulary.hpp"

namespace pairdbn {

/// Everything a pipeline run needs. Defaults match config/default.json.
struct RunConfig {
  ScenarioConfig scenario;
  TrainParams train;
  ScoreConfig score;
  std::vector<FeatureCombination> combinations = default_combinations();
  double sync_tolerance_ms = 50.0;
  std::uint64_t seed = 1;

  /// Propagates `seed` into the simulator, GNG and filter seeds.
  void apply_seed(std::uint64_t value);
  void validate() const;
};

/// Overlays the keys present in a JSON config document onto `config`.
/// Unknown keys raise ConfigError.
void apply_config_json(RunConfig& config, const std::string& text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
/// The defaults as a JSON document (the content of config/default.json).
std::string default_config_json();

inline constexpr const char* kLeaderFile = "leader.csv";
inline constexpr const char* kFollowerFile = "follower.csv";
inline constexpr const char* kEventsFile = "events.csv";

struct SimulateOutput {
  std::size_t sample_count = 0;
  std::vector<EventWindow> windows;
  std::string summary;
};

/// Writes leader.csv, follower.csv and events.csv into `out_dir`.
SimulateOutput run_simulate(const RunConfig& config, const std::filesystem::path& out_dir);

/// Reads the leader and follower streams of `data_dir` and synchronizes them.
SyncResult load_synchronized(const std::filesystem::path& data_dir, const RunConfig& config);

struct TrainedUnit {
  std::string vehicle_id;
  std::string combination;
  std::filesystem::path path;
  std::size_t dictionary_size = 0;
  std::size_t observed_transitions = 0;
  double max_row_error = 0.0;
};

struct TrainOutput {
  std::vector<TrainedUnit> models;
  std::string summary;
};

/// One `<vehicle>_<combination>.dbn` per vehicle and combination.
TrainOutput run_train(const RunConfig& config, const std::filesystem::path& data_dir,
                      const std::filesystem::path& models_dir);

struct DetectedUnit {
  std::string name;
  std::filesystem::path report_path;
  std::filesystem::path summary_path;
  double mean_theta = 0.0;
  std::size_t flagged = 0;
  std::size_t intervals = 0;
};

struct DetectOutput {
  std::vector<DetectedUnit> reports;
  std::string summary;
};

/// Scores the telemetry of `data_dir` with every model in `models_dir` whose
/// combination is selected; writes `<name>.csv` and `<name>.summary.json`.
DetectOutput run_detect(const RunConfig& config, const std::filesystem::path& data_dir,
                        const std::filesystem::path& models_dir,
                        const std::filesystem::path& out_dir);

struct CompareOutput {
  ComparisonTable table;
  std::filesystem::path table_path;
  std::string summary;
};

/// Compares report CSVs against the event windows; writes comparison.csv.
CompareOutput run_compare(const std::vector<std::filesystem::path>& reports,
                          const std::filesystem::path& events_path,
                          const std::filesystem::path& out_dir);

/// Report CSVs of a detect output directory, sorted by name.
std::vector<std::filesystem::path> list_reports(const std::filesystem::path& dir);

}  // namespace pairdbn
