#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace pairdbn {

/// Upper bound on the generalized-state dimension (channels * 2).
/// Vectors and matrices keep their storage inline up to this size, so the
/// per-particle filter arithmetic never touches the heap.
inline constexpr int kMaxStateDim = 12;

using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxStateDim, 1>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                             kMaxStateDim, kMaxStateDim>;

/// Nanoseconds since the Unix epoch.
using Timestamp = std::int64_t;

inline constexpr double kNanosPerSecond = 1e9;

}  // namespace pairdbn
