#include "pairdbn/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pairdbn/error.hpp"

namespace pairdbn {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string location(std::string_view source, std::size_t row, std::string_view column) {
  std::ostringstream out;
  out << source << ": row " << row << ", column " << column;
  return out.str();
}

}  // namespace

double TelemetryFrame::channel(std::string_view name) const {
  const auto it = channels.find(name);
  if (it == channels.end()) {
    throw SchemaError("frame at " + std::to_string(timestamp_ns) + " has no channel '" +
                      std::string(name) + "'");
  }
  return it->second;
}

const std::vector<std::string>& standard_channels() {
  static const std::vector<std::string> channels{"x", "y", "steering", "velocity", "power"};
  return channels;
}

FeatureCombination parse_combination(std::string_view text) {
  text = trim(text);
  if (text == "SP") return {"SP", {"steering", "power"}};
  if (text == "VP") return {"VP", {"velocity", "power"}};
  if (text == "SV") return {"SV", {"steering", "velocity"}};
  if (text == "XY") return {"XY", {"x", "y"}};

  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 >= text.size()) {
    throw ConfigError("unknown feature combination '" + std::string(text) +
                      "' (expected SP, VP, SV, XY or NAME=ch1+ch2)");
  }
  FeatureCombination combination;
  combination.name = std::string(trim(text.substr(0, eq)));
  std::string_view rest = text.substr(eq + 1);
  while (!rest.empty()) {
    const auto plus = rest.find('+');
    const auto part = trim(rest.substr(0, plus));
    const auto& known = standard_channels();
    if (std::find(known.begin(), known.end(), part) == known.end()) {
      throw ConfigError("unknown channel '" + std::string(part) + "' in combination '" +
                        combination.name + "'");
    }
    if (std::find(combination.channels.begin(), combination.channels.end(), part) !=
        combination.channels.end()) {
      throw ConfigError("channel '" + std::string(part) + "' repeated in combination '" +
                        combination.name + "'");
    }
    combination.channels.emplace_back(part);
    if (plus == std::string_view::npos) break;
    rest = rest.substr(plus + 1);
  }
  if (combination.channels.empty()) {
    throw ConfigError("combination '" + combination.name + "' has no channels");
  }
  if (2 * combination.channels.size() > static_cast<std::size_t>(kMaxStateDim)) {
    throw ConfigError("combination '" + combination.name + "' has too many channels");
  }
  return combination;
}

std::vector<FeatureCombination> default_combinations() {
  return {parse_combination("SP"), parse_combination("VP"), parse_combination("SV"),
          parse_combination("XY")};
}

TelemetryStream ingest(const std::filesystem::path& path, std::span<const std::string> schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open telemetry file " + path.string());
  return parse_telemetry_csv(in, schema, path.string());
}

TelemetryStream parse_telemetry_csv(std::istream& in, std::span<const std::string> schema,
                                    std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(std::string(source) + ": empty file");

  const auto header = split_fields(trim(line));
  auto column_of = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw SchemaError(std::string(source) + ": missing column '" + std::string(name) + "'");
  };
  const std::size_t ts_col = column_of("timestamp_ns");
  const std::size_t id_col = column_of("vehicle_id");
  std::vector<std::size_t> channel_cols;
  channel_cols.reserve(schema.size());
  for (const auto& name : schema) channel_cols.push_back(column_of(name));

  TelemetryStream frames;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(trim(line));
    if (fields.size() != header.size()) {
      throw ParseError(std::string(source) + ": row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    TelemetryFrame frame;
    const auto ts = trim(fields[ts_col]);
    const auto [ts_end, ts_ec] = std::from_chars(ts.data(), ts.data() + ts.size(), frame.timestamp_ns);
    if (ts_ec != std::errc() || ts_end != ts.data() + ts.size()) {
      throw ParseError(location(source, row, "timestamp_ns") + ": not an integer '" +
                       std::string(ts) + "'");
    }
    frame.vehicle_id = std::string(trim(fields[id_col]));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto cell = trim(fields[channel_cols[c]]);
      double value = 0.0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || end != cell.data() + cell.size()) {
        throw ParseError(location(source, row, schema[c]) + ": not a number '" +
                         std::string(cell) + "'");
      }
      if (!std::isfinite(value)) {
        throw ParseError(location(source, row, schema[c]) + ": non-finite value '" +
                         std::string(cell) + "'");
      }
      frame.channels.emplace(schema[c], value);
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_telemetry_csv(std::ostream& out, std::span<const TelemetryFrame> frames,
                         std::span<const std::string> schema) {
  out << "timestamp_ns,vehicle_id";
  for (const auto& name : schema) out << ',' << name;
  out << '\n';
  char buffer[64];
  for (const auto& frame : frames) {
    out << frame.timestamp_ns << ',' << frame.vehicle_id;
    for (const auto& name : schema) {
      std::snprintf(buffer, sizeof buffer, "%.6f", frame.channel(name));
      out << ',' << buffer;
    }
    out << '\n';
  }
}

std::string SyncResult::summary() const {
  std::ostringstream out;
  out << "sync:\n"
      << "  reference_frames: " << reference_count << '\n'
      << "  merged_records: " << records.size() << '\n'
      << "  dropped: " << dropped << '\n';
  for (std::size_t i = 0; i < dropped_per_stream.size(); ++i) {
    out << "  dropped_stream_" << (i + 1) << ": " << dropped_per_stream[i] << '\n';
  }
  return out.str();
}

SyncResult synchronize(std::span<const TelemetryStream> streams, Timestamp tolerance_ns) {
  if (tolerance_ns <= 0) throw ConfigError("synchronization tolerance must be positive");
  if (streams.empty()) throw DataError("synchronize: no streams given");
  for (std::size_t s = 0; s < streams.size(); ++s) {
    const auto& stream = streams[s];
    if (stream.empty()) throw DataError("synchronize: stream " + std::to_string(s) + " is empty");
    for (std::size_t k = 1; k < stream.size(); ++k) {
      if (stream[k].timestamp_ns <= stream[k - 1].timestamp_ns) {
        throw DataError("synchronize: stream " + std::to_string(s) + " (" +
                        stream[k].vehicle_id + ") is not strictly increasing at frame " +
                        std::to_string(k));
      }
    }
  }

  SyncResult result;
  const auto& reference = streams.front();
  result.reference_count = reference.size();
  result.dropped_per_stream.assign(streams.size() - 1, 0);
  result.records.reserve(reference.size());

  for (const auto& ref : reference) {
    MergedRecord record;
    record.timestamp_ns = ref.timestamp_ns;
    record.frames.reserve(streams.size());
    record.frames.push_back(ref);
    bool complete = true;
    for (std::size_t s = 1; s < streams.size(); ++s) {
      const auto& other = streams[s];
      const auto it = std::lower_bound(
          other.begin(), other.end(), ref.timestamp_ns,
          [](const TelemetryFrame& f, Timestamp t) { return f.timestamp_ns < t; });
      // Nearest neighbour; on equal distance the earlier frame wins.
      auto best = other.end();
      Timestamp best_gap = 0;
      if (it != other.begin()) {
        best = std::prev(it);
        best_gap = ref.timestamp_ns - best->timestamp_ns;
      }
      if (it != other.end()) {
        const Timestamp gap = it->timestamp_ns - ref.timestamp_ns;
        if (best == other.end() || gap < best_gap) {
          best = it;
          best_gap = gap;
        }
      }
      if (best_gap > tolerance_ns) {
        complete = false;
        ++result.dropped_per_stream[s - 1];
        continue;
      }
      record.frames.push_back(*best);
    }
    if (complete) {
      result.records.push_back(std::move(record));
    } else {
      ++result.dropped;
    }
  }
  return result;
}

TelemetryStream extract_stream(const SyncResult& merged, std::size_t index) {
  TelemetryStream out;
  out.reserve(merged.records.size());
  for (const auto& record : merged.records) {
    if (index >= record.frames.size()) throw ConfigError("extract_stream: index out of range");
    out.push_back(record.frames[index]);
  }
  return out;
}

double NormalizationParams::normalize(std::size_t i, double raw) const {
  if (degenerate(i)) return 0.5;
  return (raw - min[i]) / (max[i] - min[i]);
}

double NormalizationParams::denormalize(std::size_t i, double value) const {
  if (degenerate(i)) return min[i];
  return min[i] + value * (max[i] - min[i]);
}

Vector NormalizationParams::normalize(const Vector& raw) const {
  Vector out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    out[i] = normalize(static_cast<std::size_t>(i), raw[i]);
  }
  return out;
}

Vector NormalizationParams::denormalize(const Vector& value) const {
  Vector out(value.size());
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    out[i] = denormalize(static_cast<std::size_t>(i), value[i]);
  }
  return out;
}

NormalizationParams fit_normalization(std::span<const TelemetryFrame> frames,
                                      const FeatureCombination& combination) {
  if (frames.empty()) throw DataError("fit_normalization: no frames");
  if (combination.channels.empty()) throw ConfigError("fit_normalization: empty combination");
  NormalizationParams params;
  params.channels = combination.channels;
  params.min.assign(combination.dimension(), 0.0);
  params.max.assign(combination.dimension(), 0.0);
  for (std::size_t c = 0; c < combination.dimension(); ++c) {
    double lo = frames.front().channel(combination.channels[c]);
    double hi = lo;
    for (const auto& frame : frames) {
      const double v = frame.channel(combination.channels[c]);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    params.min[c] = lo;
    params.max[c] = hi;
  }
  return params;
}

Vector channel_vector(const TelemetryFrame& frame, const FeatureCombination& combination) {
  Vector v(static_cast<Eigen::Index>(combination.dimension()));
  for (std::size_t c = 0; c < combination.dimension(); ++c) {
    v[static_cast<Eigen::Index>(c)] = frame.channel(combination.channels[c]);
  }
  return v;
}

std::vector<GeneralizedState> derive_states(std::span<const TelemetryFrame> frames,
                                            const FeatureCombination& combination,
                                            const NormalizationParams& params,
                                            double overshoot) {
  if (frames.size() < 2) {
    throw DataError("derive_states: need at least 2 records, got " + std::to_string(frames.size()));
  }
  if (params.channels != combination.channels) {
    throw ConfigError("derive_states: normalization channels do not match combination '" +
                      combination.name + "'");
  }
  const auto j = static_cast<Eigen::Index>(combination.dimension());
  std::vector<GeneralizedState> states;
  states.reserve(frames.size());
  Vector previous;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    Vector x = params.normalize(channel_vector(frames[k], combination));
    x = x.cwiseMax(-overshoot).cwiseMin(1.0 + overshoot);
    GeneralizedState state;
    state.timestamp_ns = frames[k].timestamp_ns;
    state.order = 1;
    state.value.resize(2 * j);
    state.value.head(j) = x;
    if (k == 0) {
      state.value.tail(j).setZero();
    } else {
      const Timestamp dt_ns = frames[k].timestamp_ns - frames[k - 1].timestamp_ns;
      if (dt_ns <= 0) {
        throw DataError("derive_states: non-increasing timestamps between records " +
                        std::to_string(k - 1) + " (" + std::to_string(frames[k - 1].timestamp_ns) +
                        ") and " + std::to_string(k) + " (" +
                        std::to_string(frames[k].timestamp_ns) + ")");
      }
      const double dt = static_cast<double>(dt_ns) / kNanosPerSecond;
      state.value.tail(j) = (x - previous) / dt;
    }
    previous = x;
    states.push_back(std::move(state));
  }
  return states;
}

}  // namespace pairdbn
