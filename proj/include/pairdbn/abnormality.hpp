#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pairdbn/events.hpp"
#include "pairdbn/mjpf.hpp"
#include "pairdbn/telemetry.hpp"
#include "pairdbn/types.hpp"
#include "pairdbn/vocabulary.hpp"

namespace pairdbn {

/// Bhattacharyya coefficient between two Gaussians, exp(-D_B). Covariances
/// are symmetrized and regularized with +1e-12 I when not positive definite.
double bhattacharyya_gaussian(const Vector& mean1, const Matrix& cov1, const Vector& mean2,
                              const Matrix& cov2);

/// Hellinger distance sqrt(1 - lambda), lambda clamped to [0, 1].
double hellinger(double lambda);

struct AbnormalitySample {
  Timestamp timestamp_ns = 0;
  double lambda = 1.0;
  double theta = 0.0;
  bool above_threshold = false;
  bool underflow = false;
};

struct FlaggedInterval {
  std::size_t first = 0;
  std::size_t last = 0;
  Timestamp start_ns = 0;
  Timestamp end_ns = 0;
  double peak_theta = 0.0;
};

struct AbnormalityReport {
  std::string model_name;
  double threshold = 0.4;
  std::vector<AbnormalitySample> samples;
  std::vector<FlaggedInterval> intervals;

  double mean_theta() const;
  double max_theta() const;
  std::size_t flagged_count() const;
  /// Mean theta over samples inside any of `windows` (inside = true) or
  /// outside all of them (inside = false). NaN when no sample qualifies.
  double mean_theta(std::span<const EventWindow> windows, bool inside) const;
};

inline constexpr double kDefaultThreshold = 0.4;
inline constexpr std::size_t kDefaultMergeGap = 3;

struct ScoreConfig {
  MjpfConfig filter;
  double threshold = kDefaultThreshold;
  /// Weighted average of per-particle coefficients instead of the
  /// moment-matched mixture.
  bool per_particle = false;
  /// Flagged runs separated by fewer unflagged samples than this are merged.
  std::size_t merge_gap = kDefaultMergeGap;

  void validate() const;
};

/// Flags runs of above-threshold samples, merging short gaps.
std::vector<FlaggedInterval> flag_intervals(std::span<const AbnormalitySample> samples,
                                            std::size_t merge_gap = kDefaultMergeGap);

/// Runs predict -> score -> update over the stream. The first sample is scored
/// against the initial particle density.
AbnormalityReport score_stream(const DbnModel& model, std::span<const GeneralizedState> states,
                               const ScoreConfig& config);

/// Report CSV: `timestamp_ns,theta,lambda,flag`.
void write_report_csv(std::ostream& out, const AbnormalityReport& report);
AbnormalityReport parse_report_csv(std::istream& in, std::string model_name,
                                   std::size_t merge_gap = kDefaultMergeGap);
AbnormalityReport read_report_csv(const std::filesystem::path& path,
                                  std::size_t merge_gap = kDefaultMergeGap);
/// Structured-text (JSON) summary.
std::string report_summary(const AbnormalityReport& report,
                           std::span<const EventWindow> windows = {});

struct ComparisonRow {
  std::size_t window = 0;
  std::string window_label;
  std::string model_name;
  std::size_t samples = 0;
  double mean_theta = 0.0;
  double peak_theta = 0.0;
  bool detected = false;
  /// First flagged sample in the window, or -1.
  Timestamp onset_ns = -1;
  std::size_t rank = 0;
  bool best = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> warnings;

  std::string to_csv() const;
};

/// Per window and report: mean and peak theta, detection verdict and onset.
/// Rows are grouped by window and ranked by peak theta inside the window, mean
/// theta breaking ties. The top-ranked detecting report of each window is
/// marked best. When a window's vehicle has reports (named `<vehicle>_...`),
/// only those are ranked for it. Reports whose time spans do not overlap
/// raise DataError.
ComparisonTable compare(std::span<const AbnormalityReport> reports,
                        std::span<const EventWindow> windows);

}  // namespace pairdbn
