#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pairdbn/random.hpp"
#include "pairdbn/types.hpp"
#include "pairdbn/vocabulary.hpp"

namespace pairdbn {

struct MjpfConfig {
  std::size_t particles = 200;
  /// Resample when the effective sample size drops below fraction * N.
  double resample_fraction = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One word hypothesis carrying its own Kalman filter over [X, dX/dt].
struct Particle {
  std::size_t word = 0;
  Vector mean;
  Matrix covariance;
  double weight = 0.0;
};

/// Prediction over the observed (position) block: the per-particle Gaussian
/// components and their moment-matched single Gaussian.
struct PredictedDensity {
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  std::vector<double> weights;
  Vector mean;
  Matrix covariance;
};

struct UpdateResult {
  bool underflow = false;
  bool resampled = false;
  double effective_sample_size = 0.0;
};

/// Markov Jump Particle Filter: particle filter over words, Kalman filter over
/// the continuous generalized state inside each particle.
///
/// The filter keeps a reference to the model; the model must outlive it.
class MarkovJumpParticleFilter {
 public:
  /// Draws N words from the empirical training frequency; each particle starts
  /// at its word's letter centroids with the word covariance.
  MarkovJumpParticleFilter(const DbnModel& model, const MjpfConfig& config);

  /// Density of the current particle set over the observed block, without a
  /// time update.
  PredictedDensity current_density() const;

  /// Samples each particle's next word from its transition row and runs the
  /// Kalman time update over `dt` seconds.
  PredictedDensity predict(double dt);

  /// Kalman measurement update, reweighting by the predictive likelihood, and
  /// systematic resampling when the effective sample size is low.
  UpdateResult update(const Vector& measurement);

  std::span<const Particle> particles() const { return particles_; }
  /// Weighted mean of the particle means.
  Vector estimate() const;
  double effective_sample_size() const;

  const DbnModel& model() const { return model_; }

 private:
  PredictedDensity density() const;
  void resample();

  const DbnModel& model_;
  MjpfConfig config_;
  Rng rng_;
  std::vector<Particle> particles_;
  Matrix observation_;
};

/// Systematic resampling: indices drawn with one uniform offset `u` in [0, 1).
/// `weights` must sum to 1.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t count,
                                             double u);

}  // namespace pairdbn
