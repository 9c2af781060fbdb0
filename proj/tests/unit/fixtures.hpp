#pragma once

#include <vector>

#include "pairdbn/random.hpp"
#include "pairdbn/telemetry.hpp"
#include "pairdbn/vocabulary.hpp"

namespace fixtures {

inline pairdbn::FeatureCombination one_channel() { return {"T", {"speed"}}; }

inline pairdbn::NormalizationParams unit_normalization() { return {{"speed"}, {0.0}, {1.0}}; }

// 1-D states sweeping [0, 1] back and forth at `speed` per second, sampled
// every 10 ms, with N(0, sigma^2) noise on the derivative.
inline std::vector<pairdbn::GeneralizedState> zigzag(std::size_t n, double speed, double sigma,
                                                     std::uint64_t seed) {
  pairdbn::Rng rng(seed);
  std::vector<pairdbn::GeneralizedState> out;
  double x = 0.0;
  double direction = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = direction * speed + rng.normal(0.0, sigma);
    x += v * 0.01;
    if (x > 1.0 || x < 0.0) direction = -direction;
    pairdbn::GeneralizedState s;
    s.timestamp_ns = static_cast<pairdbn::Timestamp>(k) * 10'000'000;
    s.value = pairdbn::Vector(2);
    s.value << x, v;
    out.push_back(s);
  }
  return out;
}

inline pairdbn::DbnModel trained_model(std::uint64_t seed = 3) {
  pairdbn::TrainParams params;
  params.gng.max_nodes = 6;
  params.gng.seed = seed;
  return pairdbn::train(zigzag(2000, 0.5, 0.05, seed), one_channel(), unit_normalization(), params,
                        "leader");
}

}  // namespace fixtures
