#pragma once

#include "pairdbn/types.hpp"

namespace pairdbn {

inline constexpr double kEigenFloor = 1e-12;

/// Symmetrizes `c` and, when it is not positive definite, clamps its
/// eigenvalues at `floor`. Returns true when the eigenvalue clamp ran.
bool repair_covariance(Matrix& c, double floor = kEigenFloor);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& c);

/// log det of a symmetric positive definite matrix.
double log_det_spd(const Matrix& c);

/// Log density of N(0, cov) at `x`.
double gaussian_log_pdf(const Vector& x, const Matrix& cov);

}  // namespace pairdbn
