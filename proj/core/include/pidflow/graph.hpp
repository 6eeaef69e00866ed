#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pidflow {

/// Undirected weighted edge between agents i and j (0-based, i != j).
struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
};

/// Connected undirected graph. Immutable after construction; edges are stored
/// once per unordered pair with i < j.
class Graph {
 public:
  /// Cycle on n vertices with unit weights. Requires n >= 3.
  static Graph ring(int n_agents);

  /// Builds a graph from a weighted edge list. Repeated pairs with equal
  /// weight collapse into one edge. Rejects self-loops, out-of-range
  /// indices, non-positive weights and disconnected topologies.
  static Graph from_edges(int n_agents, std::span<const Edge> edges);

  int n_agents() const noexcept { return n_agents_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// Degree minus adjacency.
  Eigen::MatrixXd laplacian() const;

 private:
  Graph(int n_agents, std::vector<Edge> edges);

  int n_agents_;
  std::vector<Edge> edges_;
};

/// Spectral data of a connected graph consumed by the dynamics and the
/// convergence analysis.
///
/// gamma is the positive-definite matrix with L * gamma = gamma * L = pi,
/// realized as the pseudoinverse of L plus the rank-one term (1/N) 1 1^T.
struct LaplacianBundle {
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd eigenvalues;  // ascending
  double lambda_max_L = 0.0;
  double lambda_max_LtL = 0.0;
  double fiedler = 0.0;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd pi;

  int n_agents() const noexcept { return static_cast<int>(laplacian.rows()); }
};

/// Threshold on the second-smallest Laplacian eigenvalue below which a graph
/// is treated as disconnected.
inline constexpr double kConnectivityTolerance = 1e-8;

LaplacianBundle laplacian_bundle(const Graph& graph);

/// Centering projector I - (1/N) 1 1^T.
Eigen::MatrixXd centering_projector(int n_agents);

/// Computes (L kron I_n) x blockwise, where x stacks N blocks of length n.
Eigen::VectorXd kron_apply(const Eigen::MatrixXd& L, int block_dim, const Eigen::VectorXd& x);

/// Writes (L kron I_n) x into out (resized if needed).
void kron_apply_into(const Eigen::MatrixXd& L, int block_dim,
                     const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace pidflow
