#pragma once

#include <Eigen/Dense>

namespace mtdc {

/// Solves A x = rhs for the small, badly row-scaled matrices the closed loops
/// produce (rows of order 1e-3 next to rows of order 1e7).
///
/// Rows are equilibrated to unit max-norm, the system is factorised with full
/// pivoting and the result gets one step of iterative refinement against the
/// unscaled matrix. Throws NumericalError when A is singular to working precision.
Eigen::VectorXd solve_equilibrated(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs);

/// Smallest singular value divided by the largest.
double inverse_condition(const Eigen::MatrixXd& A);

}  // namespace mtdc
