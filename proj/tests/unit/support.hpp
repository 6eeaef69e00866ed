#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pidflow/pidflow.hpp"

namespace pidflow::test {

/// Error code thrown by f, or nullopt when it returns normally.
template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double inf_norm(const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

/// Random connected graph: a spanning path over a shuffled order plus extra edges.
inline Graph random_connected_graph(int n, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<Edge> edges;
  for (int k = 0; k + 1 < n; ++k) {
    edges.push_back({order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k + 1)],
                     rng.uniform(0.5, 2.0)});
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform(0, 1) < 0.25) {
        bool present = false;
        for (const Edge& e : edges) present |= (e.i == i && e.j == j) || (e.i == j && e.j == i);
        if (!present) edges.push_back({i, j, rng.uniform(0.5, 2.0)});
      }
    }
  }
  return Graph::from_edges(n, edges);
}

inline std::shared_ptr<const LaplacianBundle> bundle_ptr(const Graph& g) {
  return std::make_shared<const LaplacianBundle>(laplacian_bundle(g));
}

inline std::shared_ptr<const ObjectiveSet> set_ptr(ObjectiveSet set) {
  return std::make_shared<const ObjectiveSet>(std::move(set));
}

/// Dense Kronecker product A (x) I_n.
inline Eigen::MatrixXd kron_identity(const Eigen::MatrixXd& A, int n) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows() * n, A.cols() * n);
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * n, j * n, n, n) = A(i, j) * Eigen::MatrixXd::Identity(n, n);
  return out;
}

// Dense oracle: materialize (I + c3 L) (x) I and invert it directly.
inline Eigen::VectorXd first_order_dense(const Dynamics& d, const Eigen::VectorXd& y) {
  const int N = d.n_agents(), n = d.dim();
  const Eigen::Index len = static_cast<Eigen::Index>(N) * n;
  const Gains& c = d.gains();
  const Eigen::MatrixXd LI = kron_identity(d.bundle().laplacian, n);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(len, len) + c.c3 * LI;
  const Eigen::VectorXd x = y.head(len), lam = y.segment(len, len);
  Eigen::VectorXd out(2 * len);
  out.head(len) = M.inverse() * (-c.c1 * stacked_grad(d.objectives(), x) - c.c2 * LI * x - lam);
  out.segment(len, len) = c.c4 * LI * x;
  return out;
}

// Per-agent double loop over neighbours for the second-order family.
inline Eigen::VectorXd second_order_loop(const Dynamics& d, const Eigen::VectorXd& y) {
  const int N = d.n_agents(), n = d.dim();
  const Eigen::Index len = static_cast<Eigen::Index>(N) * n;
  const Gains& c = d.gains();
  const Eigen::MatrixXd& L = d.bundle().laplacian;
  const bool corollary = d.variant() == Variant::kCorollary || d.variant() == Variant::kZhu2022;
  const double c5 = d.variant() == Variant::kZhu2022 ? 0.0 : c.c5;
  Eigen::VectorXd out(3 * len);
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd xi = y.segment(i * n, n);
    const Eigen::VectorXd li = y.segment(len + i * n, n);
    const Eigen::VectorXd vi = y.segment(2 * len + i * n, n);
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(n), dv = Eigen::VectorXd::Zero(n),
                    dl = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      const double a = -L(i, j);
      dx += a * (xi - y.segment(j * n, n));
      dv += a * (vi - y.segment(2 * len + j * n, n));
      dl += a * (li - y.segment(len + j * n, n));
    }
    const Eigen::VectorXd integral = corollary ? dl : li;
    out.segment(i * n, n) = vi;
    out.segment(len + i * n, n) = dx;
    out.segment(2 * len + i * n, n) = -c.c1 * d.objectives().local(i).gradient(xi) - c.c2 * dx -
                                      c.c3 * integral - c.c4 * dv - c5 * vi;
  }
  return out;
}

/// Relative error of the analytic gradient against central differences.
inline double fd_rel_error(const LocalObjective& f, const Eigen::VectorXd& z) {
  const double step = 1e-6;
  Eigen::VectorXd fd(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    Eigen::VectorXd zp = z, zm = z;
    zp(k) += step;
    zm(k) -= step;
    fd(k) = (f.value(zp) - f.value(zm)) / (2 * step);
  }
  const Eigen::VectorXd g = f.gradient(z);
  return (g - fd).norm() / std::max(1.0, g.norm());
}

}  // namespace pidflow::test
