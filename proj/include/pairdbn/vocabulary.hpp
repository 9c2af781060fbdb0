#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pairdbn/gng.hpp"
#include "pairdbn/telemetry.hpp"
#include "pairdbn/types.hpp"

namespace pairdbn {

/// A discrete generalized state: one letter per derivative order.
struct Word {
  std::vector<int> letters;
  std::size_t index = 0;
};

/// Mixed-radix packing, order-0 letter most significant.
std::size_t pack_word(std::span<const int> letters, std::span<const int> radices);
std::vector<int> unpack_word(std::size_t index, std::span<const int> radices);

/// Word-level transition probabilities with additive smoothing.
///
/// P(w -> w') = (count(w -> w') + kappa) / (count(w -> .) + kappa * size).
/// Rows without outgoing observations are uniform.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  TransitionMatrix(std::size_t size, double smoothing);

  std::size_t size() const { return size_; }
  double smoothing() const { return smoothing_; }

  void add_count(std::size_t from, std::size_t to, double count = 1.0);
  /// Recomputes probabilities and cumulative rows from the counts.
  void finalize();

  double probability(std::size_t from, std::size_t to) const;
  double count(std::size_t from, std::size_t to) const;
  double row_total(std::size_t from) const;
  /// Smallest `to` whose cumulative probability exceeds u in [0, 1).
  std::size_t sample(std::size_t from, double u) const;

  /// Sparse list of non-zero counts, row-major order.
  struct Entry {
    std::size_t from;
    std::size_t to;
    double count;
  };
  std::vector<Entry> nonzero_counts() const;
  /// Number of distinct observed transitions.
  std::size_t observed_transitions() const;

 private:
  std::size_t size_ = 0;
  double smoothing_ = 0.0;
  std::vector<double> counts_;
  std::vector<double> row_totals_;
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

TransitionMatrix estimate_transitions(std::span<const std::size_t> words,
                                      std::size_t dictionary_size, double smoothing);

/// Statistics of the training states encoded as one word.
struct WordStats {
  std::size_t count = 0;
  /// Mean first-derivative block; the control input for this word.
  Vector mean_derivative;
  /// Covariance of the full generalized state.
  Matrix covariance;
};

struct TrainParams {
  GngParams gng;
  double smoothing = 0.01;
  /// Lower bound on the measurement noise variance per normalized channel.
  double measurement_noise_floor = 1e-4;
  /// Pull of the velocity block toward the word's control per step.
  double control_gain = 0.5;
  /// Multiplier on the residual-estimated process noise.
  double noise_scale = 4.0;
  /// R_ii = max(floor, measurement_scale * Q_ii) with Q already scaled.
  double measurement_scale = 2.0;

  void validate() const;
};

/// A trained pair-based switching DBN for one feature combination.
struct DbnModel {
  static constexpr int kFormatVersion = 1;

  std::string vehicle_id;
  FeatureCombination combination;
  NormalizationParams normalization;
  int order = 1;
  /// letters[i] is the GNG node set of derivative order i.
  std::vector<std::vector<GngNode>> letters;
  TransitionMatrix transitions;
  std::vector<WordStats> words;
  /// Covariance assigned to words never observed in training.
  Matrix fallback_covariance;
  Matrix process_noise;
  Matrix measurement_noise;
  double control_gain = 0.5;

  std::size_t channels() const { return combination.dimension(); }
  std::size_t state_dimension() const { return channels() * static_cast<std::size_t>(order + 1); }
  std::vector<int> radices() const;
  std::size_t dictionary_size() const;
  std::size_t training_samples() const;

  /// Initial state mean for a word: the letter centroids stacked by order.
  Vector word_centroid(std::size_t word) const;
};

/// Assigns each derivative-order slice to its letter and packs the tuple.
Word encode(const DbnModel& model, const GeneralizedState& state);
Word decode(const DbnModel& model, std::size_t index);

/// Constant-velocity transition with the velocity pulled toward `control`:
/// v' = (1 - g) v + g u, x' = x + v' dt.
Matrix transition_matrix(std::size_t channels, double dt, double control_gain);
Vector control_offset(const Vector& control, double dt, double control_gain);

/// Fits per-order GNGs, encodes the training words, estimates transitions,
/// per-word statistics and noise covariances.
DbnModel train(std::span<const GeneralizedState> states, const FeatureCombination& combination,
               const NormalizationParams& normalization, const TrainParams& params,
               std::string vehicle_id = {});

}  // namespace pairdbn
