#include "mtdc/linalg.hpp"

#include <cmath>

#include "mtdc/errors.hpp"

namespace mtdc {

Eigen::VectorXd solve_equilibrated(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
  if (A.rows() != A.cols() || A.rows() != rhs.size()) {
    throw NumericalError("solve: dimension mismatch");
  }
  Eigen::VectorXd row_scale = A.rowwise().lpNorm<Eigen::Infinity>();
  if ((row_scale.array() == 0.0).any()) throw NumericalError("solve: matrix has a zero row");
  row_scale = row_scale.cwiseInverse();
  const Eigen::MatrixXd scaled = row_scale.asDiagonal() * A;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(scaled);
  if (!lu.isInvertible()) throw NumericalError("solve: matrix is singular to working precision");
  Eigen::VectorXd x = lu.solve(row_scale.cwiseProduct(rhs));
  const Eigen::VectorXd residual = rhs - A * x;
  x += lu.solve(row_scale.cwiseProduct(residual));
  if (!x.allFinite()) throw NumericalError("solve: non-finite solution");
  return x;
}

double inverse_condition(const Eigen::MatrixXd& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

}  // namespace mtdc
