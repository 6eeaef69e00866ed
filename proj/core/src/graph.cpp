#include "pidflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "pidflow/errors.hpp"

namespace pidflow {

namespace {

Eigen::MatrixXd assemble_laplacian(int n, const std::vector<Edge>& edges) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : edges) {
    L(e.i, e.j) -= e.weight;
    L(e.j, e.i) -= e.weight;
    L(e.i, e.i) += e.weight;
    L(e.j, e.j) += e.weight;
  }
  return L;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigensolve(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical,
                "symmetric eigensolver failed on a " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + " matrix (info=" +
                    std::to_string(static_cast<int>(solver.info())) + ")");
  }
  return solver;
}

}  // namespace

Graph::Graph(int n_agents, std::vector<Edge> edges) : n_agents_(n_agents), edges_(std::move(edges)) {}

Graph Graph::ring(int n_agents) {
  if (n_agents < 3) {
    throw Error(ErrorCode::kInvalidTopology,
                "ring topology needs at least 3 agents, got " + std::to_string(n_agents));
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    const int j = (i + 1) % n_agents;
    edges.push_back({std::min(i, j), std::max(i, j), 1.0});
  }
  return Graph(n_agents, std::move(edges));
}

Graph Graph::from_edges(int n_agents, std::span<const Edge> edges) {
  if (n_agents < 1) {
    throw Error(ErrorCode::kInvalidTopology,
                "graph needs at least one agent, got " + std::to_string(n_agents));
  }
  std::map<std::pair<int, int>, double> unique;
  for (const Edge& e : edges) {
    if (e.i < 0 || e.i >= n_agents || e.j < 0 || e.j >= n_agents) {
      throw Error(ErrorCode::kInvalidEdge, "edge (" + std::to_string(e.i) + ", " +
                                               std::to_string(e.j) + ") has an index outside [0, " +
                                               std::to_string(n_agents) + ")");
    }
    if (e.i == e.j) {
      throw Error(ErrorCode::kInvalidEdge, "self-loop at vertex " + std::to_string(e.i));
    }
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw Error(ErrorCode::kInvalidEdge, "edge (" + std::to_string(e.i) + ", " +
                                               std::to_string(e.j) +
                                               ") needs a positive finite weight");
    }
    const auto key = std::minmax(e.i, e.j);
    auto [it, inserted] = unique.emplace(key, e.weight);
    if (!inserted && it->second != e.weight) {
      throw Error(ErrorCode::kInvalidEdge, "edge (" + std::to_string(e.i) + ", " +
                                               std::to_string(e.j) +
                                               ") repeated with a different weight");
    }
  }

  std::vector<Edge> stored;
  stored.reserve(unique.size());
  for (const auto& [key, w] : unique) stored.push_back({key.first, key.second, w});

  if (n_agents > 1) {
    const auto solver = eigensolve(assemble_laplacian(n_agents, stored));
    if (solver.eigenvalues()[1] <= kConnectivityTolerance) {
      throw Error(ErrorCode::kNotConnected,
                  "graph is not connected (second-smallest Laplacian eigenvalue " +
                      std::to_string(solver.eigenvalues()[1]) + ")");
    }
  }
  return Graph(n_agents, std::move(stored));
}

Eigen::MatrixXd Graph::laplacian() const { return assemble_laplacian(n_agents_, edges_); }

Eigen::MatrixXd centering_projector(int n_agents) {
  const double inv_n = 1.0 / static_cast<double>(n_agents);
  return Eigen::MatrixXd::Identity(n_agents, n_agents) -
         Eigen::MatrixXd::Constant(n_agents, n_agents, inv_n);
}

LaplacianBundle laplacian_bundle(const Graph& graph) {
  const int n = graph.n_agents();
  LaplacianBundle b;
  b.laplacian = graph.laplacian();
  b.pi = centering_projector(n);

  const auto solver = eigensolve(b.laplacian);
  b.eigenvalues = solver.eigenvalues();
  b.lambda_max_L = b.eigenvalues[n - 1];
  b.fiedler = n > 1 ? b.eigenvalues[1] : 0.0;
  if (n > 1 && b.fiedler <= kConnectivityTolerance) {
    throw Error(ErrorCode::kNotConnected, "laplacian_bundle requires a connected graph");
  }

  const Eigen::MatrixXd LtL = b.laplacian.transpose() * b.laplacian;
  const auto ltl_solver = eigensolve(LtL);
  b.lambda_max_LtL = ltl_solver.eigenvalues()[n - 1];

  // Pseudoinverse on the nullspace complement; the nullspace of a connected
  // graph's Laplacian is span{1}, which is exactly eigenvector 0.
  const Eigen::MatrixXd& U = solver.eigenvectors();
  Eigen::VectorXd inv_eig = Eigen::VectorXd::Zero(n);
  for (int k = 1; k < n; ++k) inv_eig[k] = 1.0 / b.eigenvalues[k];
  const Eigen::MatrixXd pinv = U * inv_eig.asDiagonal() * U.transpose();
  b.gamma = pinv + Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  b.gamma = 0.5 * (b.gamma + b.gamma.transpose());
  return b;
}

void kron_apply_into(const Eigen::MatrixXd& L, int block_dim,
                     const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) {
  const Eigen::Index n_agents = L.rows();
  if (L.cols() != n_agents || block_dim < 1 || x.size() != n_agents * block_dim ||
      out.size() != x.size()) {
    throw Error(ErrorCode::kShape, "kron_apply: expected a square " + std::to_string(n_agents) +
                                       "-agent matrix and vectors of length " +
                                       std::to_string(n_agents * block_dim) + ", got " +
                                       std::to_string(x.size()));
  }
  // Column i of X is block i of x, so (L kron I) x has blocks X * L^T.
  Eigen::Map<const Eigen::MatrixXd> X(x.data(), block_dim, n_agents);
  Eigen::Map<Eigen::MatrixXd> Y(out.data(), block_dim, n_agents);
  Y.noalias() = X * L.transpose();
}

Eigen::VectorXd kron_apply(const Eigen::MatrixXd& L, int block_dim, const Eigen::VectorXd& x) {
  if (block_dim < 1 || x.size() != L.rows() * block_dim) {
    throw Error(ErrorCode::kShape, "kron_apply: vector of length " + std::to_string(x.size()) +
                                       " does not stack " + std::to_string(L.rows()) +
                                       " blocks of dimension " + std::to_string(block_dim));
  }
  Eigen::VectorXd out(x.size());
  kron_apply_into(L, block_dim, x, out);
  return out;
}

}  // namespace pidflow
