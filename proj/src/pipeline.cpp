#include "pairdbn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <future>
#include <sstream>

#include <json.hpp>

#include "pairdbn/error.hpp"
#include "pairdbn/model_io.hpp"

namespace pairdbn {

namespace {

using Json = nlohmann::ordered_json;

// One configurable value: how to read it into a RunConfig and how to print it.
struct Field {
  std::string section;
  std::string key;
  std::function<void(const Json&)> set;
  std::function<Json()> get;
};

template <typename T>
Field bind(std::string section, std::string key, T& ref) {
  const std::string name = section.empty() ? key : section + "." + key;
  return {std::move(section), std::move(key),
          [&ref, name](const Json& value) {
            try {
              if constexpr (std::is_same_v<T, bool>) {
                ref = value.get<bool>();
              } else if constexpr (std::is_integral_v<T>) {
                if (!value.is_number_integer()) throw ConfigError("config: '" + name + "' must be an integer");
                if constexpr (std::is_unsigned_v<T>) {
                  if (value.get<std::int64_t>() < 0) throw ConfigError("config: '" + name + "' must be >= 0");
                }
                ref = value.get<T>();
              } else {
                if (!value.is_number()) throw ConfigError("config: '" + name + "' must be a number");
                ref = value.get<T>();
              }
            } catch (const nlohmann::json::exception&) {
              throw ConfigError("config: '" + name + "' has the wrong type");
            }
          },
          [&ref]() { return Json(ref); }};
}

std::vector<Field> fields(RunConfig& c) {
  auto& s = c.scenario;
  auto& g = c.train.gng;
  std::vector<Field> f;
  f.push_back(bind("", "seed", c.seed));
  f.push_back(bind("", "sync_tolerance_ms", c.sync_tolerance_ms));
  f.push_back({"", "combinations",
               [&c](const Json& value) {
                 if (!value.is_array() || value.empty()) {
                   throw ConfigError("config: 'combinations' must be a non-empty list");
                 }
                 std::vector<FeatureCombination> combos;
                 for (const auto& item : value) {
                   if (!item.is_string()) throw ConfigError("config: combination names must be strings");
                   combos.push_back(parse_combination(item.get<std::string>()));
                 }
                 c.combinations = std::move(combos);
               },
               [&c]() {
                 Json out = Json::array();
                 for (const auto& combo : c.combinations) {
                   const auto standard = default_combinations();
                   const bool builtin = std::any_of(standard.begin(), standard.end(), [&](const auto& d) {
                     return d.name == combo.name && d.channels == combo.channels;
                   });
                   if (builtin) {
                     out.push_back(combo.name);
                   } else {
                     std::string text = combo.name + "=";
                     for (std::size_t i = 0; i < combo.channels.size(); ++i) {
                       text += (i ? "+" : "") + combo.channels[i];
                     }
                     out.push_back(text);
                   }
                 }
                 return out;
               }});

  f.push_back({"scenario", "scenario",
               [&s](const Json& value) {
                 if (!value.is_string()) throw ConfigError("config: 'scenario.scenario' must be a string");
                 s.scenario = parse_scenario(value.get<std::string>());
               },
               [&s]() { return Json(std::string(scenario_name(s.scenario))); }});
  f.push_back(bind("scenario", "laps", s.laps));
  f.push_back(bind("scenario", "width_m", s.width_m));
  f.push_back(bind("scenario", "height_m", s.height_m));
  f.push_back(bind("scenario", "corner_radius_m", s.corner_radius_m));
  f.push_back(bind("scenario", "cruise_speed", s.cruise_speed));
  f.push_back(bind("scenario", "corner_speed_ratio", s.corner_speed_ratio));
  f.push_back(bind("scenario", "sample_rate_hz", s.sample_rate_hz));
  f.push_back(bind("scenario", "follower_gap_m", s.follower_gap_m));
  f.push_back(bind("scenario", "dwell_s", s.dwell_s));
  f.push_back(bind("scenario", "start_accel", s.start_accel));
  f.push_back(bind("scenario", "stop_decel", s.stop_decel));
  f.push_back(bind("scenario", "wheelbase_m", s.wheelbase_m));
  f.push_back(bind("scenario", "event_time_s", s.event_time_s));
  f.push_back(bind("scenario", "stop_duration_s", s.stop_duration_s));
  f.push_back(bind("scenario", "emergency_decel", s.emergency_decel));
  f.push_back(bind("scenario", "hold_power", s.hold_power));
  f.push_back(bind("scenario", "hold_power_sigma", s.hold_power_sigma));
  f.push_back(bind("scenario", "follower_reaction_s", s.follower_reaction_s));
  f.push_back(bind("scenario", "follower_gap_gain", s.follower_gap_gain));
  f.push_back(bind("scenario", "follower_max_accel", s.follower_max_accel));
  f.push_back(bind("scenario", "follower_max_decel", s.follower_max_decel));
  f.push_back(bind("scenario", "follower_max_speed", s.follower_max_speed));
  f.push_back(bind("scenario", "power_c1", s.power_c1));
  f.push_back(bind("scenario", "power_c2", s.power_c2));
  f.push_back(bind("scenario", "power_c3", s.power_c3));
  f.push_back(bind("scenario", "noise_position_m", s.noise_position_m));
  f.push_back(bind("scenario", "noise_velocity", s.noise_velocity));
  f.push_back(bind("scenario", "noise_steering_deg", s.noise_steering_deg));
  f.push_back(bind("scenario", "noise_power", s.noise_power));
  f.push_back(bind("scenario", "start_time_ns", s.start_time_ns));

  f.push_back(bind("gng", "max_nodes", g.max_nodes));
  f.push_back(bind("gng", "insertion_interval", g.insertion_interval));
  f.push_back(bind("gng", "winner_rate", g.winner_rate));
  f.push_back(bind("gng", "neighbor_rate", g.neighbor_rate));
  f.push_back(bind("gng", "max_edge_age", g.max_edge_age));
  f.push_back(bind("gng", "split_error_decay", g.split_error_decay));
  f.push_back(bind("gng", "error_decay", g.error_decay));
  f.push_back(bind("gng", "epochs", g.epochs));

  f.push_back(bind("train", "smoothing", c.train.smoothing));
  f.push_back(bind("train", "measurement_noise_floor", c.train.measurement_noise_floor));
  f.push_back(bind("train", "control_gain", c.train.control_gain));
  f.push_back(bind("train", "noise_scale", c.train.noise_scale));
  f.push_back(bind("train", "measurement_scale", c.train.measurement_scale));

  f.push_back(bind("detect", "particles", c.score.filter.particles));
  f.push_back(bind("detect", "resample_fraction", c.score.filter.resample_fraction));
  f.push_back(bind("detect", "threshold", c.score.threshold));
  f.push_back(bind("detect", "per_particle", c.score.per_particle));
  f.push_back(bind("detect", "merge_gap", c.score.merge_gap));
  return f;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string format(const char* fmt, auto... args) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, fmt, args...);
  return buffer;
}

// Runs jobs on worker threads and returns results in submission order; the
// first exception (in order) is rethrown.
template <typename R>
std::vector<R> run_all(std::vector<std::function<R()>>& jobs) {
  std::vector<std::future<R>> futures;
  futures.reserve(jobs.size());
  for (auto& job : jobs) futures.push_back(std::async(std::launch::async, job));
  std::vector<R> results;
  std::exception_ptr failure;
  for (auto& fut : futures) {
    try {
      results.push_back(fut.get());
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

const TelemetryStream& stream_for(const std::vector<TelemetryStream>& streams, const std::string& vehicle) {
  if (vehicle == kLeaderId) return streams[0];
  if (vehicle == kFollowerId) return streams[1];
  throw DataError("no telemetry stream for vehicle '" + vehicle + "'");
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t value) {
  seed = value;
  scenario.seed = value;
  train.gng.seed = value;
  score.filter.seed = value;
}

void RunConfig::validate() const {
  scenario.validate();
  train.validate();
  score.validate();
  if (combinations.empty()) throw ConfigError("config: no feature combinations selected");
  if (!(sync_tolerance_ms > 0.0)) throw ConfigError("config: sync tolerance must be > 0");
}

void apply_config_json(RunConfig& config, const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  auto table = fields(config);
  auto find = [&](const std::string& section, const std::string& key) -> Field* {
    for (auto& f : table) {
      if (f.section == section && f.key == key) return &f;
    }
    return nullptr;
  };
  bool seed_given = false;
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) {
      const bool known = std::any_of(table.begin(), table.end(), [&](const Field& f) { return f.section == key; });
      if (!known) throw ConfigError("config: unknown section '" + key + "'");
      for (const auto& [inner, v] : value.items()) {
        Field* f = find(key, inner);
        if (!f) throw ConfigError("config: unknown key '" + key + "." + inner + "'");
        f->set(v);
      }
      continue;
    }
    Field* f = find("", key);
    if (!f) throw ConfigError("config: unknown key '" + key + "'");
    f->set(value);
    if (key == "seed") seed_given = true;
  }
  if (seed_given) config.apply_seed(config.seed);
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  apply_config_json(config, buffer.str());
}

std::string default_config_json() {
  RunConfig config;
  Json doc = Json::object();
  for (const auto& f : fields(config)) {
    if (f.section.empty()) {
      doc[f.key] = f.get();
    } else {
      doc[f.section][f.key] = f.get();
    }
  }
  return doc.dump(2) + "\n";
}

SimulateOutput run_simulate(const RunConfig& config, const std::filesystem::path& out_dir) {
  config.scenario.validate();
  const auto result = simulate(config.scenario);
  ensure_directory(out_dir);
  {
    std::ostringstream leader;
    write_telemetry_csv(leader, result.leader);
    write_file(out_dir / kLeaderFile, leader.str());
    std::ostringstream follower;
    write_telemetry_csv(follower, result.follower);
    write_file(out_dir / kFollowerFile, follower.str());
    std::ostringstream events;
    write_event_windows(events, result.truth.windows);
    write_file(out_dir / kEventsFile, events.str());
  }
  SimulateOutput out;
  out.sample_count = result.sample_count;
  out.windows = result.truth.windows;
  std::ostringstream summary;
  const double duration = static_cast<double>(result.sample_count - 1) / config.scenario.sample_rate_hz;
  summary << "scenario " << scenario_name(config.scenario.scenario) << ", " << config.scenario.laps
          << " laps, seed " << config.scenario.seed << "\n"
          << "frames per vehicle: " << result.sample_count << format(" (%.1f s)", duration) << "\n"
          << "event windows: " << result.truth.windows.size() << "\n";
  for (const auto& w : result.truth.windows) {
    const double start = static_cast<double>(w.start_ns - config.scenario.start_time_ns) / kNanosPerSecond;
    const double end = static_cast<double>(w.end_ns - config.scenario.start_time_ns) / kNanosPerSecond;
    summary << "  " << w.vehicle_id << " " << w.kind << format(" %.1f s - %.1f s", start, end) << "\n";
  }
  summary << "wrote " << (out_dir / kLeaderFile).string() << ", " << (out_dir / kFollowerFile).string()
          << ", " << (out_dir / kEventsFile).string() << "\n";
  out.summary = summary.str();
  return out;
}

SyncResult load_synchronized(const std::filesystem::path& data_dir, const RunConfig& config) {
  std::vector<TelemetryStream> streams;
  streams.push_back(ingest(data_dir / kLeaderFile));
  streams.push_back(ingest(data_dir / kFollowerFile));
  const auto tolerance = static_cast<Timestamp>(std::llround(config.sync_tolerance_ms * 1e6));
  return synchronize(streams, tolerance);
}

namespace {

std::vector<TelemetryStream> vehicle_streams(const SyncResult& merged) {
  return {extract_stream(merged, 0), extract_stream(merged, 1)};
}

double max_row_error(const TransitionMatrix& t) {
  double worst = 0.0;
  for (std::size_t from = 0; from < t.size(); ++from) {
    double sum = 0.0;
    for (std::size_t to = 0; to < t.size(); ++to) sum += t.probability(from, to);
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

}  // namespace

TrainOutput run_train(const RunConfig& config, const std::filesystem::path& data_dir,
                      const std::filesystem::path& models_dir) {
  config.validate();
  const auto merged = load_synchronized(data_dir, config);
  const auto streams = vehicle_streams(merged);
  ensure_directory(models_dir);

  std::vector<std::function<TrainedUnit()>> jobs;
  for (const auto& vehicle : {kLeaderId, kFollowerId}) {
    for (const auto& combo : config.combinations) {
      jobs.emplace_back([&, vehicle, combo]() {
        const auto& frames = stream_for(streams, vehicle);
        const auto norm = fit_normalization(frames, combo);
        const auto states = derive_states(frames, combo, norm);
        const auto model = train(states, combo, norm, config.train, vehicle);
        TrainedUnit unit;
        unit.vehicle_id = vehicle;
        unit.combination = combo.name;
        unit.path = models_dir / (vehicle + "_" + combo.name + ".dbn");
        unit.dictionary_size = model.dictionary_size();
        unit.observed_transitions = model.transitions.observed_transitions();
        unit.max_row_error = max_row_error(model.transitions);
        save_model(model, unit.path);
        return unit;
      });
    }
  }
  TrainOutput out;
  out.models = run_all(jobs);

  std::ostringstream summary;
  summary << "training frames per vehicle: " << merged.records.size() << "\n";
  for (const auto& m : out.models) {
    const double density = static_cast<double>(m.observed_transitions) /
                           static_cast<double>(m.dictionary_size * m.dictionary_size);
    summary << m.vehicle_id << "_" << m.combination << ": " << m.dictionary_size << " words, "
            << m.observed_transitions << " observed transitions"
            << format(" (%.2f%% of the matrix), max |row sum - 1| = %.1e", 100.0 * density, m.max_row_error)
            << " -> " << m.path.string() << "\n";
  }
  out.summary = summary.str();
  return out;
}

DetectOutput run_detect(const RunConfig& config, const std::filesystem::path& data_dir,
                        const std::filesystem::path& models_dir, const std::filesystem::path& out_dir) {
  config.validate();
  std::vector<std::filesystem::path> model_paths;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(models_dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dbn") model_paths.push_back(entry.path());
  }
  if (ec) throw DataError("cannot read models directory " + models_dir.string() + ": " + ec.message());
  std::sort(model_paths.begin(), model_paths.end());

  std::vector<DbnModel> models;
  for (const auto& path : model_paths) {
    auto model = load_model(path);
    const bool selected = std::any_of(config.combinations.begin(), config.combinations.end(),
                                      [&](const FeatureCombination& c) { return c.name == model.combination.name; });
    if (selected) models.push_back(std::move(model));
  }
  if (models.empty()) throw DataError("no models for the selected combinations in " + models_dir.string());

  const auto merged = load_synchronized(data_dir, config);
  const auto streams = vehicle_streams(merged);
  std::vector<EventWindow> windows;
  if (std::filesystem::exists(data_dir / kEventsFile)) windows = read_event_windows(data_dir / kEventsFile);
  ensure_directory(out_dir);

  std::vector<std::function<DetectedUnit()>> jobs;
  for (const auto& model : models) {
    jobs.emplace_back([&]() {
      const auto& frames = stream_for(streams, model.vehicle_id);
      for (const auto& channel : model.combination.channels) {
        if (frames.empty() || !frames.front().channels.contains(channel)) {
          throw DataError("telemetry lacks channel '" + channel + "' required by model " +
                          model.vehicle_id + "_" + model.combination.name);
        }
      }
      const auto states = derive_states(frames, model.combination, model.normalization);
      const auto report = score_stream(model, states, config.score);
      DetectedUnit unit;
      unit.name = report.model_name;
      unit.report_path = out_dir / (unit.name + ".csv");
      unit.summary_path = out_dir / (unit.name + ".summary.json");
      std::ostringstream csv;
      write_report_csv(csv, report);
      write_file(unit.report_path, csv.str());
      write_file(unit.summary_path, report_summary(report, windows));
      unit.mean_theta = report.mean_theta();
      unit.flagged = report.flagged_count();
      unit.intervals = report.intervals.size();
      return unit;
    });
  }
  DetectOutput out;
  out.reports = run_all(jobs);
  std::ostringstream summary;
  summary << "scored " << merged.records.size() << " frames per vehicle, threshold "
          << format("%.2f", config.score.threshold) << "\n";
  for (const auto& r : out.reports) {
    summary << r.name << format(": mean theta %.3f, ", r.mean_theta) << r.flagged << " flagged samples in "
            << r.intervals << " intervals -> " << r.report_path.string() << "\n";
  }
  out.summary = summary.str();
  return out;
}

CompareOutput run_compare(const std::vector<std::filesystem::path>& reports,
                          const std::filesystem::path& events_path, const std::filesystem::path& out_dir) {
  if (reports.empty()) throw DataError("compare: no report files given");
  std::vector<AbnormalityReport> loaded;
  for (const auto& path : reports) loaded.push_back(read_report_csv(path));
  const auto windows = read_event_windows(events_path);
  CompareOutput out;
  out.table = compare(loaded, windows);
  ensure_directory(out_dir);
  out.table_path = out_dir / "comparison.csv";
  write_file(out.table_path, out.table.to_csv());

  std::ostringstream summary;
  for (const auto& w : out.table.warnings) summary << "warning: " << w << "\n";
  std::string current;
  for (const auto& row : out.table.rows) {
    if (row.window_label != current) {
      current = row.window_label;
      summary << "window " << current << "\n";
    }
    summary << format("  %zu. ", row.rank) << row.model_name
            << format("  peak %.3f  mean %.3f  ", row.peak_theta, row.mean_theta)
            << (row.detected ? "detected" : "not detected") << (row.best ? "  (best)" : "") << "\n";
  }
  summary << "wrote " << out.table_path.string() << "\n";
  out.summary = summary.str();
  return out;
}

std::vector<std::filesystem::path> list_reports(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".csv" && p.filename() != "comparison.csv") {
      out.push_back(p);
    }
  }
  if (ec) throw DataError("cannot read reports directory " + dir.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace pairdbn
