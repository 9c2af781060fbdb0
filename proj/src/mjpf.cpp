#include "pairdbn/mjpf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "pairdbn/error.hpp"
#include "pairdbn/linalg.hpp"

namespace pairdbn {

void MjpfConfig::validate() const {
  if (particles == 0) throw ConfigError("mjpf: particle count must be >= 1");
  if (!(resample_fraction > 0.0 && resample_fraction <= 1.0)) {
    throw ConfigError("mjpf: resample fraction must be in (0, 1]");
  }
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             double u) {
  std::vector<std::size_t> indices;
  indices.reserve(count);
  const double step = 1.0 / static_cast<double>(count);
  double position = u * step;
  double cumulative = weights.empty() ? 0.0 : weights[0];
  std::size_t i = 0;
  for (std::size_t m = 0; m < count; ++m) {
    while (position > cumulative && i + 1 < weights.size()) {
      ++i;
      cumulative += weights[i];
    }
    indices.push_back(i);
    position += step;
  }
  return indices;
}

MarkovJumpParticleFilter::MarkovJumpParticleFilter(const DbnModel& model, const MjpfConfig& config)
    : model_(model), config_(config), rng_(config.seed) {
  config_.validate();
  const auto j = static_cast<Eigen::Index>(model_.channels());
  observation_ = Matrix::Zero(j, 2 * j);
  observation_.leftCols(j).setIdentity();

  // Empirical word frequency of the training data.
  const std::size_t dictionary = model_.dictionary_size();
  std::vector<double> cumulative(dictionary, 0.0);
  double running = 0.0;
  for (std::size_t w = 0; w < dictionary; ++w) {
    running += static_cast<double>(model_.words[w].count);
    cumulative[w] = running;
  }
  if (running <= 0.0) throw DataError("mjpf: model has no training word counts");

  particles_.resize(config_.particles);
  const double weight = 1.0 / static_cast<double>(config_.particles);
  for (auto& p : particles_) {
    const double target = rng_.uniform() * running;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    p.word = static_cast<std::size_t>(it - cumulative.begin());
    p.mean = model_.word_centroid(p.word);
    p.covariance = model_.words[p.word].covariance;
    p.weight = weight;
  }
}

PredictedDensity MarkovJumpParticleFilter::density() const {
  const auto j = observation_.rows();
  PredictedDensity d;
  d.means.reserve(particles_.size());
  d.covariances.reserve(particles_.size());
  d.weights.reserve(particles_.size());
  d.mean = Vector::Zero(j);
  for (const auto& p : particles_) {
    d.means.emplace_back(p.mean.head(j));
    d.covariances.emplace_back(p.covariance.topLeftCorner(j, j));
    d.weights.push_back(p.weight);
    d.mean += p.weight * d.means.back();
  }
  d.covariance = Matrix::Zero(j, j);
  for (std::size_t i = 0; i < d.means.size(); ++i) {
    const Vector diff = d.means[i] - d.mean;
    d.covariance += d.weights[i] * (d.covariances[i] + diff * diff.transpose());
  }
  d.covariance = (0.5 * (d.covariance + d.covariance.transpose())).eval();
  return d;
}

PredictedDensity MarkovJumpParticleFilter::current_density() const { return density(); }

PredictedDensity MarkovJumpParticleFilter::predict(double dt) {
  const Matrix f = transition_matrix(model_.channels(), dt, model_.control_gain);
  const Matrix ft = f.transpose();
  for (auto& p : particles_) {
    p.word = model_.transitions.sample(p.word, rng_.uniform());
    const Vector& control = model_.words[p.word].mean_derivative;
    p.mean = f * p.mean + control_offset(control, dt, model_.control_gain);
    p.covariance = f * p.covariance * ft + model_.process_noise;
    repair_covariance(p.covariance);
  }
  return density();
}

UpdateResult MarkovJumpParticleFilter::update(const Vector& measurement) {
  const auto j = observation_.rows();
  if (measurement.size() != j) {
    throw DataError("mjpf: measurement dimension " + std::to_string(measurement.size()) +
                    " does not match model channels " + std::to_string(j));
  }
  const Matrix& r = model_.measurement_noise;
  const auto n = observation_.cols();

  std::vector<double> log_weights(particles_.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < particles_.size(); ++i) {
    auto& p = particles_[i];
    const Vector innovation = measurement - p.mean.head(j);
    Matrix s = p.covariance.topLeftCorner(j, j) + r;
    s = (0.5 * (s + s.transpose())).eval();
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
      repair_covariance(s);
      llt.compute(s);
    }
    // K = P H^T S^-1 with H selecting the position block.
    const Matrix pht = p.covariance.leftCols(j);
    const Matrix gain = llt.solve(pht.transpose()).transpose();
    p.mean += gain * innovation;
    // Joseph form keeps the covariance symmetric PSD.
    Matrix ikh = Matrix::Identity(n, n);
    ikh.leftCols(j) -= gain;
    p.covariance = ikh * p.covariance * ikh.transpose() + gain * r * gain.transpose();
    repair_covariance(p.covariance);

    const Vector solved = llt.matrixL().solve(innovation);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double log_lik =
        -0.5 * (solved.squaredNorm() + log_det + static_cast<double>(j) * std::log(2.0 * M_PI));
    log_weights[i] = std::log(p.weight) + log_lik;
    max_log = std::max(max_log, log_weights[i]);
  }

  UpdateResult result;
  double total = 0.0;
  for (const double lw : log_weights) total += std::exp(lw - max_log);
  const double log_total = max_log + std::log(total);
  // The evidence itself is below the smallest normal double: treat as underflow.
  if (!std::isfinite(log_total) || log_total < std::log(std::numeric_limits<double>::min())) {
    result.underflow = true;
    const double uniform = 1.0 / static_cast<double>(particles_.size());
    for (auto& p : particles_) p.weight = uniform;
  } else {
    for (std::size_t i = 0; i < particles_.size(); ++i) {
      particles_[i].weight = std::exp(log_weights[i] - log_total);
    }
    double sum = 0.0;
    for (const auto& p : particles_) sum += p.weight;
    for (auto& p : particles_) p.weight /= sum;
  }

  result.effective_sample_size = effective_sample_size();
  if (result.effective_sample_size <
      config_.resample_fraction * static_cast<double>(particles_.size())) {
    resample();
    result.resampled = true;
  }
  return result;
}

void MarkovJumpParticleFilter::resample() {
  std::vector<double> weights;
  weights.reserve(particles_.size());
  for (const auto& p : particles_) weights.push_back(p.weight);
  const auto indices = systematic_resample(weights, particles_.size(), rng_.uniform());
  std::vector<Particle> next;
  next.reserve(particles_.size());
  const double uniform = 1.0 / static_cast<double>(particles_.size());
  for (const auto i : indices) {
    next.push_back(particles_[i]);
    next.back().weight = uniform;
  }
  particles_ = std::move(next);
}

Vector MarkovJumpParticleFilter::estimate() const {
  Vector mean = Vector::Zero(particles_.front().mean.size());
  for (const auto& p : particles_) mean += p.weight * p.mean;
  return mean;
}

double MarkovJumpParticleFilter::effective_sample_size() const {
  double sq = 0.0;
  for (const auto& p : particles_) sq += p.weight * p.weight;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

}  // namespace pairdbn
