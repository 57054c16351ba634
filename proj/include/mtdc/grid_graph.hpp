#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace mtdc {

/// Undirected weighted edge between two converters (0-based indices).
///
/// For the line network the weight is the conductance 1/R_ij in siemens; for
/// the communication network it is the dimensionless gain c_ij.
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;
};

/// Static, connected, undirected weighted graph.
///
/// Construction validates every invariant (index range, no self loops, no
/// duplicate undirected edges, strictly positive finite weights, connectivity)
/// and throws ValidationError / ConnectivityError on violation. Instances are
/// immutable afterwards.
class GridTopology {
 public:
  GridTopology(std::size_t node_count, std::vector<Edge> edges);

  std::size_t node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Neighbours of `node` together with the connecting edge weight.
  std::vector<std::pair<std::size_t, double>> neighbors(std::size_t node) const;

  /// Same graph with every weight multiplied by `factor` (> 0).
  GridTopology scaled(double factor) const;

 private:
  std::size_t node_count_;
  std::vector<Edge> edges_;
};

/// Dense symmetric weighted Laplacian L = B W B^T.
class LaplacianMatrix {
 public:
  explicit LaplacianMatrix(Eigen::MatrixXd values);

  const Eigen::MatrixXd& matrix() const { return values_; }
  Eigen::Index size() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

  /// Largest absolute entry; the reference scale for "numerically zero".
  double max_abs() const { return values_.cwiseAbs().maxCoeff(); }

 private:
  Eigen::MatrixXd values_;
};

LaplacianMatrix build_laplacian(const GridTopology& topology);

struct Eigenpair {
  double value = 0.0;
  Eigen::VectorXd vector;
};

/// Orthonormal eigendecomposition of a Laplacian, eigenvalues ascending.
///
/// Eigenvalues within 1e-9·max|L| of zero are snapped to exactly zero and the
/// corresponding eigenvector of a connected graph is sign-normalised so that
/// its entries are positive (1/sqrt(n) each).
std::vector<Eigenpair> spectral_decomposition(const LaplacianMatrix& laplacian);

/// Tolerance factor used to call a Laplacian eigenvalue zero.
inline constexpr double kZeroEigenvalueTolerance = 1e-9;

}  // namespace mtdc
