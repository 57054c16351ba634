#include "mtdc/grid_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "mtdc/errors.hpp"

namespace mtdc {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

std::string edge_name(const Edge& e) {
  // Reported 1-based, matching the configuration files.
  return "(" + std::to_string(e.from + 1) + ", " + std::to_string(e.to + 1) + ")";
}

}  // namespace

GridTopology::GridTopology(std::size_t node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ == 0) {
    throw ValidationError("graph must have at least one node");
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  DisjointSets components(node_count_);
  for (const Edge& e : edges_) {
    if (e.from >= node_count_ || e.to >= node_count_) {
      throw ValidationError("edge " + edge_name(e) + " references a node outside 1.." +
                            std::to_string(node_count_));
    }
    if (e.from == e.to) {
      throw ValidationError("edge " + edge_name(e) + " is a self loop");
    }
    if (!std::isfinite(e.weight) || e.weight <= 0.0) {
      throw ValidationError("edge " + edge_name(e) + " has non-positive weight");
    }
    auto key = std::minmax(e.from, e.to);
    if (!seen.insert(key).second) {
      throw ValidationError("duplicate edge " + edge_name(e));
    }
    components.unite(e.from, e.to);
  }
  const std::size_t root = components.find(0);
  for (std::size_t i = 1; i < node_count_; ++i) {
    if (components.find(i) != root) {
      throw ConnectivityError("graph is disconnected: node " + std::to_string(i + 1) +
                              " is not reachable from node 1");
    }
  }
}

std::vector<std::pair<std::size_t, double>> GridTopology::neighbors(std::size_t node) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (const Edge& e : edges_) {
    if (e.from == node) out.emplace_back(e.to, e.weight);
    if (e.to == node) out.emplace_back(e.from, e.weight);
  }
  return out;
}

GridTopology GridTopology::scaled(double factor) const {
  if (!(factor > 0.0)) {
    throw ValidationError("topology scale factor must be positive");
  }
  std::vector<Edge> edges = edges_;
  for (Edge& e : edges) e.weight *= factor;
  return GridTopology(node_count_, std::move(edges));
}

LaplacianMatrix::LaplacianMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) {
    throw ValidationError("Laplacian must be square");
  }
}

LaplacianMatrix build_laplacian(const GridTopology& topology) {
  const auto n = static_cast<Eigen::Index>(topology.node_count());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : topology.edges()) {
    const auto i = static_cast<Eigen::Index>(e.from);
    const auto j = static_cast<Eigen::Index>(e.to);
    L(i, j) -= e.weight;
    L(j, i) -= e.weight;
    L(i, i) += e.weight;
    L(j, j) += e.weight;
  }
  return LaplacianMatrix(std::move(L));
}

std::vector<Eigenpair> spectral_decomposition(const LaplacianMatrix& laplacian) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver failed to converge");
  }
  const double zero_tol = kZeroEigenvalueTolerance * std::max(laplacian.max_abs(), 1.0);
  std::vector<Eigenpair> pairs;
  pairs.reserve(static_cast<std::size_t>(laplacian.size()));
  for (Eigen::Index k = 0; k < laplacian.size(); ++k) {
    Eigenpair p{solver.eigenvalues()(k), solver.eigenvectors().col(k)};
    if (std::abs(p.value) <= zero_tol) {
      p.value = 0.0;
      if (p.vector.sum() < 0.0) p.vector = -p.vector;
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace mtdc
