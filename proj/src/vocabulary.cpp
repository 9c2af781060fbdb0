#include "pairdbn/vocabulary.hpp"

#include <algorithm>
#include <numeric>

#include "pairdbn/error.hpp"
#include "pairdbn/linalg.hpp"

namespace pairdbn {

std::size_t pack_word(std::span<const int> letters, std::span<const int> radices) {
  if (letters.size() != radices.size()) throw ConfigError("pack_word: order mismatch");
  std::size_t index = 0;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    if (letters[i] < 0 || letters[i] >= radices[i]) {
      throw ConfigError("pack_word: letter " + std::to_string(letters[i]) + " out of range for order " +
                        std::to_string(i));
    }
    index = index * static_cast<std::size_t>(radices[i]) + static_cast<std::size_t>(letters[i]);
  }
  return index;
}

std::vector<int> unpack_word(std::size_t index, std::span<const int> radices) {
  std::vector<int> letters(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    const auto r = static_cast<std::size_t>(radices[i]);
    letters[i] = static_cast<int>(index % r);
    index /= r;
  }
  if (index != 0) throw ConfigError("unpack_word: index out of range");
  return letters;
}

TransitionMatrix::TransitionMatrix(std::size_t size, double smoothing)
    : size_(size),
      smoothing_(smoothing),
      counts_(size * size, 0.0),
      row_totals_(size, 0.0),
      probabilities_(size * size, 0.0),
      cumulative_(size * size, 0.0) {
  if (size == 0) throw ConfigError("transition matrix: empty dictionary");
  if (smoothing < 0.0) throw ConfigError("transition matrix: smoothing must be >= 0");
}

void TransitionMatrix::add_count(std::size_t from, std::size_t to, double count) {
  if (from >= size_ || to >= size_) throw DataError("transition matrix: word out of range");
  counts_[from * size_ + to] += count;
  row_totals_[from] += count;
}

void TransitionMatrix::finalize() {
  const double n = static_cast<double>(size_);
  for (std::size_t from = 0; from < size_; ++from) {
    const double total = row_totals_[from];
    const double denominator = total + smoothing_ * n;
    double running = 0.0;
    for (std::size_t to = 0; to < size_; ++to) {
      const std::size_t k = from * size_ + to;
      probabilities_[k] = denominator > 0.0 ? (counts_[k] + smoothing_) / denominator : 1.0 / n;
      running += probabilities_[k];
      cumulative_[k] = running;
    }
  }
}

double TransitionMatrix::probability(std::size_t from, std::size_t to) const {
  return probabilities_.at(from * size_ + to);
}

double TransitionMatrix::count(std::size_t from, std::size_t to) const {
  return counts_.at(from * size_ + to);
}

double TransitionMatrix::row_total(std::size_t from) const { return row_totals_.at(from); }

std::size_t TransitionMatrix::sample(std::size_t from, double u) const {
  const auto begin = cumulative_.begin() + static_cast<std::ptrdiff_t>(from * size_);
  const auto end = begin + static_cast<std::ptrdiff_t>(size_);
  // Scale by the row total so rounding in the cumulative sum cannot push u past the end.
  const double target = u * *(end - 1);
  const auto it = std::upper_bound(begin, end, target);
  return it == end ? size_ - 1 : static_cast<std::size_t>(it - begin);
}

std::vector<TransitionMatrix::Entry> TransitionMatrix::nonzero_counts() const {
  std::vector<Entry> entries;
  for (std::size_t from = 0; from < size_; ++from) {
    if (row_totals_[from] == 0.0) continue;
    for (std::size_t to = 0; to < size_; ++to) {
      const double c = counts_[from * size_ + to];
      if (c != 0.0) entries.push_back({from, to, c});
    }
  }
  return entries;
}

std::size_t TransitionMatrix::observed_transitions() const {
  return static_cast<std::size_t>(
      std::count_if(counts_.begin(), counts_.end(), [](double c) { return c != 0.0; }));
}

TransitionMatrix estimate_transitions(std::span<const std::size_t> words,
                                      std::size_t dictionary_size, double smoothing) {
  if (words.empty()) throw DataError("estimate_transitions: empty word sequence");
  TransitionMatrix matrix(dictionary_size, smoothing);
  for (std::size_t k = 1; k < words.size(); ++k) matrix.add_count(words[k - 1], words[k]);
  matrix.finalize();
  return matrix;
}

void TrainParams::validate() const {
  gng.validate();
  if (smoothing < 0.0) throw ConfigError("train: smoothing must be >= 0");
  if (measurement_noise_floor <= 0.0) throw ConfigError("train: measurement noise floor must be > 0");
  if (control_gain < 0.0 || control_gain > 1.0) throw ConfigError("train: control gain must be in [0, 1]");
  if (noise_scale <= 0.0) throw ConfigError("train: noise scale must be > 0");
  if (measurement_scale <= 0.0) throw ConfigError("train: measurement scale must be > 0");
}

std::vector<int> DbnModel::radices() const {
  std::vector<int> r;
  r.reserve(letters.size());
  for (const auto& set : letters) r.push_back(static_cast<int>(set.size()));
  return r;
}

std::size_t DbnModel::dictionary_size() const {
  std::size_t n = 1;
  for (const auto& set : letters) n *= set.size();
  return n;
}

std::size_t DbnModel::training_samples() const {
  std::size_t n = 0;
  for (const auto& w : words) n += w.count;
  return n;
}

Vector DbnModel::word_centroid(std::size_t word) const {
  const auto tuple = unpack_word(word, radices());
  const auto j = static_cast<Eigen::Index>(channels());
  Vector mean(static_cast<Eigen::Index>(state_dimension()));
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    mean.segment(static_cast<Eigen::Index>(i) * j, j) = letters[i][tuple[i]].centroid;
  }
  return mean;
}

Word encode(const DbnModel& model, const GeneralizedState& state) {
  if (static_cast<std::size_t>(state.value.size()) != model.state_dimension() ||
      state.order != model.order) {
    throw DataError("encode: state dimension " + std::to_string(state.value.size()) +
                    " does not match model dimension " + std::to_string(model.state_dimension()));
  }
  const auto j = static_cast<Eigen::Index>(model.channels());
  Word word;
  word.letters.reserve(model.letters.size());
  for (std::size_t i = 0; i < model.letters.size(); ++i) {
    const Vector slice = state.value.segment(static_cast<Eigen::Index>(i) * j, j);
    word.letters.push_back(gng_assign(model.letters[i], slice));
  }
  word.index = pack_word(word.letters, model.radices());
  return word;
}

Word decode(const DbnModel& model, std::size_t index) {
  return {unpack_word(index, model.radices()), index};
}

Matrix transition_matrix(std::size_t channels, double dt, double control_gain) {
  const auto j = static_cast<Eigen::Index>(channels);
  const double keep = 1.0 - control_gain;
  Matrix f = Matrix::Zero(2 * j, 2 * j);
  f.topLeftCorner(j, j).setIdentity();
  f.topRightCorner(j, j) = Matrix::Identity(j, j) * (keep * dt);
  f.bottomRightCorner(j, j) = Matrix::Identity(j, j) * keep;
  return f;
}

Vector control_offset(const Vector& control, double dt, double control_gain) {
  const auto j = control.size();
  Vector b(2 * j);
  b.head(j) = control * (control_gain * dt);
  b.tail(j) = control * control_gain;
  return b;
}

namespace {

Matrix empirical_covariance(std::span<const Vector> xs) {
  const auto n = static_cast<double>(xs.size());
  Vector mean = Vector::Zero(xs.front().size());
  for (const auto& x : xs) mean += x;
  mean /= n;
  Matrix cov = Matrix::Zero(mean.size(), mean.size());
  for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose();
  return cov / n;
}

}  // namespace

DbnModel train(std::span<const GeneralizedState> states, const FeatureCombination& combination,
               const NormalizationParams& normalization, const TrainParams& params,
               std::string vehicle_id) {
  params.validate();
  if (states.size() < static_cast<std::size_t>(params.gng.insertion_interval) || states.size() < 2) {
    throw DataError("train: need at least " +
                    std::to_string(std::max(2, params.gng.insertion_interval)) +
                    " states, got " + std::to_string(states.size()));
  }
  const std::size_t j = combination.dimension();
  for (const auto& s : states) {
    if (s.order != 1) throw ConfigError("train: only first-order generalized states are supported");
    if (static_cast<std::size_t>(s.value.size()) != 2 * j) {
      throw DataError("train: state dimension does not match combination '" + combination.name + "'");
    }
  }

  DbnModel model;
  model.vehicle_id = std::move(vehicle_id);
  model.combination = combination;
  model.normalization = normalization;
  model.order = 1;
  model.control_gain = params.control_gain;

  const auto jj = static_cast<Eigen::Index>(j);
  for (int i = 0; i <= model.order; ++i) {
    std::vector<Vector> slice;
    slice.reserve(states.size());
    for (const auto& s : states) slice.emplace_back(s.value.segment(i * jj, jj));
    GngParams gng = params.gng;
    gng.seed = params.gng.seed + static_cast<std::uint64_t>(i);
    model.letters.push_back(gng_fit(slice, gng));
  }

  const std::size_t dictionary = model.dictionary_size();
  std::vector<std::size_t> sequence;
  sequence.reserve(states.size());
  for (const auto& s : states) sequence.push_back(encode(model, s).index);
  model.transitions = estimate_transitions(sequence, dictionary, params.smoothing);

  std::vector<Vector> all;
  all.reserve(states.size());
  for (const auto& s : states) all.push_back(s.value);
  model.fallback_covariance = empirical_covariance(all);
  repair_covariance(model.fallback_covariance);

  std::vector<std::vector<Vector>> members(dictionary);
  for (std::size_t k = 0; k < states.size(); ++k) members[sequence[k]].push_back(states[k].value);
  model.words.resize(dictionary);
  for (std::size_t w = 0; w < dictionary; ++w) {
    auto& stats = model.words[w];
    stats.count = members[w].size();
    if (stats.count == 0) {
      stats.mean_derivative = model.word_centroid(w).tail(jj);
      stats.covariance = model.fallback_covariance;
      continue;
    }
    stats.mean_derivative = Vector::Zero(jj);
    for (const auto& x : members[w]) stats.mean_derivative += x.tail(jj);
    stats.mean_derivative /= static_cast<double>(stats.count);
    if (stats.count >= 2) {
      stats.covariance = empirical_covariance(members[w]);
      repair_covariance(stats.covariance);
    } else {
      stats.covariance = model.fallback_covariance;
    }
  }

  // One-step residuals of the switching constant-velocity dynamics.
  Matrix q = Matrix::Zero(2 * jj, 2 * jj);
  for (std::size_t k = 1; k < states.size(); ++k) {
    const double dt =
        static_cast<double>(states[k].timestamp_ns - states[k - 1].timestamp_ns) / kNanosPerSecond;
    const Vector predicted =
        transition_matrix(j, dt, params.control_gain) * states[k - 1].value +
        control_offset(model.words[sequence[k]].mean_derivative, dt, params.control_gain);
    const Vector r = states[k].value - predicted;
    q += r * r.transpose();
  }
  q /= static_cast<double>(states.size() - 1);
  q *= params.noise_scale;
  repair_covariance(q);
  model.process_noise = q;

  model.measurement_noise = Matrix::Zero(jj, jj);
  for (Eigen::Index c = 0; c < jj; ++c) {
    model.measurement_noise(c, c) = std::max(params.measurement_noise_floor, params.measurement_scale * q(c, c));
  }
  return model;
}

}  // namespace pairdbn
