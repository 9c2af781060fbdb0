#include "pairdbn/abnormality.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "pairdbn/error.hpp"
#include "pairdbn/linalg.hpp"

namespace pairdbn {

namespace {

// Regularize with +1e-12 I until the Cholesky succeeds, then fall back to the
// eigenvalue clamp.
Eigen::LLT<Matrix> factor_spd(Matrix c) {
  c = (0.5 * (c + c.transpose())).eval();
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() == Eigen::Success) return llt;
  c += Matrix::Identity(c.rows(), c.cols()) * kEigenFloor;
  llt.compute(c);
  if (llt.info() == Eigen::Success) return llt;
  if (min_eigenvalue(c) < -1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff())) {
    throw DataError("bhattacharyya: covariance is not positive semi-definite");
  }
  repair_covariance(c);
  llt.compute(c);
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

double bhattacharyya_gaussian(const Vector& mean1, const Matrix& cov1, const Vector& mean2,
                              const Matrix& cov2) {
  const auto n = mean1.size();
  if (mean2.size() != n || cov1.rows() != n || cov1.cols() != n || cov2.rows() != n ||
      cov2.cols() != n) {
    throw DataError("bhattacharyya: dimension mismatch");
  }
  const auto llt1 = factor_spd(cov1);
  const auto llt2 = factor_spd(cov2);
  const Matrix avg = 0.5 * (cov1 + cov2);
  const auto llt = factor_spd(avg);
  const Vector diff = mean1 - mean2;
  const double mahalanobis = diff.dot(llt.solve(diff));
  const double distance =
      0.125 * mahalanobis + 0.5 * (log_det(llt) - 0.5 * (log_det(llt1) + log_det(llt2)));
  return std::clamp(std::exp(-distance), 0.0, 1.0);
}

double hellinger(double lambda) {
  if (std::isnan(lambda)) return 1.0;
  return std::sqrt(1.0 - std::clamp(lambda, 0.0, 1.0));
}

double AbnormalityReport::mean_theta() const {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& s : samples) sum += s.theta;
  return sum / static_cast<double>(samples.size());
}

double AbnormalityReport::max_theta() const {
  double peak = 0.0;
  for (const auto& s : samples) peak = std::max(peak, s.theta);
  return peak;
}

std::size_t AbnormalityReport::flagged_count() const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [](const AbnormalitySample& s) { return s.above_threshold; }));
}

double AbnormalityReport::mean_theta(std::span<const EventWindow> windows, bool inside) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    const bool in = std::any_of(windows.begin(), windows.end(),
                                [&](const EventWindow& w) { return w.contains(s.timestamp_ns); });
    if (in == inside) {
      sum += s.theta;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

void ScoreConfig::validate() const {
  filter.validate();
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("score: threshold must be in [0, 1]");
}

std::vector<FlaggedInterval> flag_intervals(std::span<const AbnormalitySample> samples,
                                            std::size_t merge_gap) {
  std::vector<FlaggedInterval> intervals;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!samples[k].above_threshold) continue;
    if (!intervals.empty() && k - intervals.back().last - 1 < merge_gap) {
      auto& last = intervals.back();
      last.last = k;
      last.end_ns = samples[k].timestamp_ns;
      last.peak_theta = std::max(last.peak_theta, samples[k].theta);
    } else {
      intervals.push_back({k, k, samples[k].timestamp_ns, samples[k].timestamp_ns, samples[k].theta});
    }
  }
  return intervals;
}

AbnormalityReport score_stream(const DbnModel& model, std::span<const GeneralizedState> states,
                               const ScoreConfig& config) {
  config.validate();
  if (states.empty()) throw DataError("score_stream: empty measurement stream");
  const auto j = static_cast<Eigen::Index>(model.channels());
  for (const auto& s : states) {
    if (static_cast<std::size_t>(s.value.size()) != model.state_dimension()) {
      throw DataError("score_stream: state dimension does not match model '" +
                      model.combination.name + "'");
    }
  }

  AbnormalityReport report;
  report.model_name = model.vehicle_id.empty() ? model.combination.name
                                               : model.vehicle_id + "_" + model.combination.name;
  report.threshold = config.threshold;
  report.samples.reserve(states.size());

  MarkovJumpParticleFilter filter(model, config.filter);
  const Matrix& r = model.measurement_noise;
  for (std::size_t k = 0; k < states.size(); ++k) {
    PredictedDensity predicted;
    if (k == 0) {
      predicted = filter.current_density();
    } else {
      const double dt =
          static_cast<double>(states[k].timestamp_ns - states[k - 1].timestamp_ns) / kNanosPerSecond;
      if (dt <= 0.0) throw DataError("score_stream: timestamps not increasing at sample " + std::to_string(k));
      predicted = filter.predict(dt);
    }
    const Vector z = states[k].value.head(j);

    AbnormalitySample sample;
    sample.timestamp_ns = states[k].timestamp_ns;
    if (config.per_particle) {
      double lambda = 0.0;
      for (std::size_t i = 0; i < predicted.means.size(); ++i) {
        lambda += predicted.weights[i] *
                  bhattacharyya_gaussian(predicted.means[i], predicted.covariances[i], z, r);
      }
      sample.lambda = std::clamp(lambda, 0.0, 1.0);
    } else {
      sample.lambda = bhattacharyya_gaussian(predicted.mean, predicted.covariance, z, r);
    }

    const auto update = filter.update(z);
    if (update.underflow) {
      sample.underflow = true;
      sample.lambda = 0.0;
    }
    sample.theta = hellinger(sample.lambda);
    sample.above_threshold = sample.theta > config.threshold;
    report.samples.push_back(sample);
  }
  report.intervals = flag_intervals(report.samples, config.merge_gap);
  return report;
}

void write_report_csv(std::ostream& out, const AbnormalityReport& report) {
  out << "timestamp_ns,theta,lambda,flag\n";
  char buffer[96];
  for (const auto& s : report.samples) {
    std::snprintf(buffer, sizeof buffer, "%.9f,%.9f,%d", s.theta, s.lambda, s.above_threshold ? 1 : 0);
    out << s.timestamp_ns << ',' << buffer << '\n';
  }
}

AbnormalityReport parse_report_csv(std::istream& in, std::string model_name, std::size_t merge_gap) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("timestamp_ns,theta,lambda,flag", 0) != 0) {
    throw SchemaError("report: expected header 'timestamp_ns,theta,lambda,flag'");
  }
  AbnormalityReport report;
  report.model_name = std::move(model_name);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    std::istringstream fields(line);
    std::string ts, theta, lambda, flag;
    if (!std::getline(fields, ts, ',') || !std::getline(fields, theta, ',') ||
        !std::getline(fields, lambda, ',') || !std::getline(fields, flag)) {
      throw ParseError("report: row " + std::to_string(row) + " needs 4 fields");
    }
    AbnormalitySample s;
    auto parse = [&](const std::string& cell, auto& value, const char* column) {
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || end != cell.data() + cell.size()) {
        throw ParseError("report: row " + std::to_string(row) + ", column " + column + ": bad value '" +
                         cell + "'");
      }
    };
    int f = 0;
    parse(ts, s.timestamp_ns, "timestamp_ns");
    parse(theta, s.theta, "theta");
    parse(lambda, s.lambda, "lambda");
    parse(flag, f, "flag");
    s.above_threshold = f != 0;
    report.samples.push_back(s);
  }
  report.intervals = flag_intervals(report.samples, merge_gap);
  return report;
}

AbnormalityReport read_report_csv(const std::filesystem::path& path, std::size_t merge_gap) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path.string());
  return parse_report_csv(in, path.stem().string(), merge_gap);
}

std::string report_summary(const AbnormalityReport& report, std::span<const EventWindow> windows) {
  nlohmann::ordered_json doc;
  doc["model"] = report.model_name;
  doc["threshold"] = report.threshold;
  doc["samples"] = report.samples.size();
  doc["mean_theta"] = report.mean_theta();
  doc["max_theta"] = report.max_theta();
  doc["flagged_samples"] = report.flagged_count();
  doc["underflow_samples"] = std::count_if(report.samples.begin(), report.samples.end(),
                                           [](const AbnormalitySample& s) { return s.underflow; });
  auto intervals = nlohmann::ordered_json::array();
  for (const auto& i : report.intervals) {
    intervals.push_back({{"start_ns", i.start_ns}, {"end_ns", i.end_ns}, {"peak_theta", i.peak_theta}});
  }
  doc["flagged_intervals"] = std::move(intervals);
  if (!windows.empty()) {
    const double inside = report.mean_theta(windows, true);
    const double outside = report.mean_theta(windows, false);
    doc["mean_theta_in_events"] = std::isnan(inside) ? nlohmann::ordered_json() : nlohmann::ordered_json(inside);
    doc["mean_theta_outside_events"] =
        std::isnan(outside) ? nlohmann::ordered_json() : nlohmann::ordered_json(outside);
  }
  return doc.dump(2) + "\n";
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "window,model,samples,mean_theta,peak_theta,detected,onset_ns,rank,best\n";
  char buffer[64];
  for (const auto& row : rows) {
    std::snprintf(buffer, sizeof buffer, "%.6f,%.6f", row.mean_theta, row.peak_theta);
    out << row.window_label << ',' << row.model_name << ',' << row.samples << ',' << buffer << ','
        << (row.detected ? "detected" : "not detected") << ',' << row.onset_ns << ',' << row.rank
        << ',' << (row.best ? 1 : 0) << '\n';
  }
  return out.str();
}

ComparisonTable compare(std::span<const AbnormalityReport> reports,
                        std::span<const EventWindow> windows) {
  ComparisonTable table;
  if (reports.empty()) throw DataError("compare: no reports");
  for (const auto& r : reports) {
    if (r.samples.empty()) throw DataError("compare: report '" + r.model_name + "' is empty");
  }
  for (std::size_t a = 0; a < reports.size(); ++a) {
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      const auto& ra = reports[a].samples;
      const auto& rb = reports[b].samples;
      if (ra.back().timestamp_ns < rb.front().timestamp_ns ||
          rb.back().timestamp_ns < ra.front().timestamp_ns) {
        throw DataError("compare: reports '" + reports[a].model_name + "' and '" +
                        reports[b].model_name + "' have disjoint timelines");
      }
    }
  }

  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& window = windows[w];
    const std::string label = window.vehicle_id + ":" + window.kind + "@" + std::to_string(window.start_ns);
    // A window belongs to one vehicle: rank that vehicle's models when present.
    const std::string prefix = window.vehicle_id + "_";
    const bool own = std::any_of(reports.begin(), reports.end(), [&](const AbnormalityReport& r) {
      return r.model_name.rfind(prefix, 0) == 0;
    });
    std::vector<ComparisonRow> rows;
    for (const auto& report : reports) {
      if (own && report.model_name.rfind(prefix, 0) != 0) continue;
      ComparisonRow row;
      row.window = w;
      row.window_label = label;
      row.model_name = report.model_name;
      double sum = 0.0;
      for (const auto& s : report.samples) {
        if (!window.contains(s.timestamp_ns)) continue;
        ++row.samples;
        sum += s.theta;
        row.peak_theta = std::max(row.peak_theta, s.theta);
        if (s.above_threshold) {
          if (!row.detected) row.onset_ns = s.timestamp_ns;
          row.detected = true;
        }
      }
      if (row.samples == 0) continue;
      row.mean_theta = sum / static_cast<double>(row.samples);
      rows.push_back(std::move(row));
    }
    if (rows.empty()) {
      table.warnings.push_back("window " + label + " lies outside the data range of every report");
      continue;
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
      if (a.peak_theta != b.peak_theta) return a.peak_theta > b.peak_theta;
      return a.mean_theta > b.mean_theta;
    });
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
    const auto best = std::find_if(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.detected; });
    if (best != rows.end()) best->best = true;
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  return table;
}

}  // namespace pairdbn
