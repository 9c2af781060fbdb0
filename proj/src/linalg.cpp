#include "pairdbn/linalg.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace pairdbn {

bool repair_covariance(Matrix& c, double floor) {
  c = (0.5 * (c + c.transpose())).eval();
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
    return false;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(c);
  Vector values = solver.eigenvalues().cwiseMax(floor);
  c = solver.eigenvectors() * values.asDiagonal() * solver.eigenvectors().transpose();
  c = (0.5 * (c + c.transpose())).eval();
  return true;
}

double min_eigenvalue(const Matrix& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(c, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double log_det_spd(const Matrix& c) {
  Eigen::LLT<Matrix> llt(c);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double gaussian_log_pdf(const Vector& x, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  const Vector solved = llt.matrixL().solve(x);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const auto n = static_cast<double>(x.size());
  return -0.5 * (solved.squaredNorm() + log_det + n * std::log(2.0 * std::numbers::pi));
}

}  // namespace pairdbn
