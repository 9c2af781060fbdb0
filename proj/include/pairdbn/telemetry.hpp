#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairdbn/types.hpp"

namespace pairdbn {

/// One timestamped multi-sensor sample from one vehicle, values in native units.
struct TelemetryFrame {
  Timestamp timestamp_ns = 0;
  std::string vehicle_id;
  std::map<std::string, double, std::less<>> channels;

  /// Throws SchemaError when the channel is absent.
  double channel(std::string_view name) const;
};

using TelemetryStream = std::vector<TelemetryFrame>;

/// x, y, steering, velocity, power: the columns of the telemetry CSV.
const std::vector<std::string>& standard_channels();

/// An ordered subset of channels modelled jointly by one DBN.
struct FeatureCombination {
  std::string name;
  std::vector<std::string> channels;

  std::size_t dimension() const { return channels.size(); }
};

/// Parses "SP", "VP", "SV", "XY" or a user definition "NAME=ch1+ch2[+...]".
/// Unknown names or channels raise ConfigError.
FeatureCombination parse_combination(std::string_view text);

/// SP, VP, SV, XY.
std::vector<FeatureCombination> default_combinations();

/// Reads a telemetry CSV (header `timestamp_ns,vehicle_id,<channels...>`).
/// Missing columns raise SchemaError; malformed cells raise ParseError naming
/// the 1-based data row and the column.
TelemetryStream ingest(const std::filesystem::path& path,
                       std::span<const std::string> schema = standard_channels());
TelemetryStream parse_telemetry_csv(std::istream& in, std::span<const std::string> schema,
                                    std::string_view source = "<stream>");

void write_telemetry_csv(std::ostream& out, std::span<const TelemetryFrame> frames,
                         std::span<const std::string> schema = standard_channels());

/// One reference timestamp with the matched frame of every input stream;
/// `frames[i]` comes from stream i.
struct MergedRecord {
  Timestamp timestamp_ns = 0;
  std::vector<TelemetryFrame> frames;
};

struct SyncResult {
  std::vector<MergedRecord> records;
  std::size_t reference_count = 0;
  std::size_t dropped = 0;
  /// Per non-reference stream: reference frames dropped because that stream
  /// had no frame within tolerance.
  std::vector<std::size_t> dropped_per_stream;

  std::string summary() const;
};

/// Pairs each frame of the first stream with the nearest frame of every other
/// stream. Records whose partner is farther than `tolerance_ns` are dropped.
SyncResult synchronize(std::span<const TelemetryStream> streams, Timestamp tolerance_ns);

/// The frames of stream `index` in merged order.
TelemetryStream extract_stream(const SyncResult& merged, std::size_t index);

inline constexpr double kDefaultOvershoot = 0.05;

/// Per-channel min/max scaling into [0, 1].
struct NormalizationParams {
  std::vector<std::string> channels;
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dimension() const { return channels.size(); }
  bool degenerate(std::size_t i) const { return max[i] == min[i]; }
  /// Degenerate channels map to 0.5. No clamping.
  double normalize(std::size_t i, double raw) const;
  double denormalize(std::size_t i, double value) const;
  Vector normalize(const Vector& raw) const;
  Vector denormalize(const Vector& value) const;
};

NormalizationParams fit_normalization(std::span<const TelemetryFrame> frames,
                                      const FeatureCombination& combination);

/// The combination's channels of one frame, in combination order.
Vector channel_vector(const TelemetryFrame& frame, const FeatureCombination& combination);

/// A normalized state stacked with its first time derivative: [X, dX/dt].
struct GeneralizedState {
  Timestamp timestamp_ns = 0;
  int order = 1;
  Vector value;

  std::size_t channels() const { return static_cast<std::size_t>(value.size()) / (order + 1); }
  auto position() const { return value.head(static_cast<Eigen::Index>(channels())); }
  auto derivative() const {
    return value.segment(static_cast<Eigen::Index>(channels()), static_cast<Eigen::Index>(channels()));
  }
};

/// Normalizes, clamps to [-overshoot, 1 + overshoot] and appends backward
/// finite-difference derivatives (per second). The first state carries a zero
/// derivative.
std::vector<GeneralizedState> derive_states(std::span<const TelemetryFrame> frames,
                                            const FeatureCombination& combination,
                                            const NormalizationParams& params,
                                            double overshoot = kDefaultOvershoot);

}  // namespace pairdbn
