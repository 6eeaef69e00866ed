#include "pidflow/objectives.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "pidflow/errors.hpp"
#include "pidflow/random.hpp"

namespace pidflow {

namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kPsdTolerance = 1e-10;
// Sums whose smallest eigenvalue falls below this are regenerated.
constexpr double kDegenerateCurvature = 1e-8;

struct NetTrig {
  double sin_amplitude = 0.0;
  double cos_amplitude = 0.0;
};

NetTrig net_trig(const std::vector<LocalObjective>& locals) {
  NetTrig net;
  for (const auto& f : locals) {
    for (const TrigTerm& t : f.trig_terms()) {
      (t.shape == TrigShape::kSin ? net.sin_amplitude : net.cos_amplitude) += t.amplitude;
    }
  }
  return net;
}

// Upper bound on the magnitude of the terms summed in sum_gradient(z); used
// as the roundoff floor of the minimizer's stopping test.
double gradient_scale(const ObjectiveSet& set, const Eigen::VectorXd& z) {
  double scale = 0.0;
  const double root_n = std::sqrt(static_cast<double>(set.dim()));
  for (const auto& f : set.locals()) {
    scale += f.Q().norm() * z.norm() + f.q().norm();
    for (const TrigTerm& t : f.trig_terms()) scale += std::abs(t.amplitude) * root_n;
  }
  return scale;
}

double roundoff_floor(const ObjectiveSet& set, const Eigen::VectorXd& z) {
  return 64.0 * std::numeric_limits<double>::epsilon() * gradient_scale(set, z);
}

}  // namespace

LocalObjective::LocalObjective(Eigen::MatrixXd Q, Eigen::VectorXd q, std::vector<TrigTerm> trig)
    : Q_(std::move(Q)), q_(std::move(q)), trig_(std::move(trig)) {}

LocalObjective LocalObjective::quadratic(Eigen::MatrixXd Q, Eigen::VectorXd q) {
  if (Q.rows() != Q.cols() || Q.rows() != q.size() || q.size() == 0) {
    throw Error(ErrorCode::kShape, "quadratic objective needs a square Q matching q (Q is " +
                                       std::to_string(Q.rows()) + "x" + std::to_string(Q.cols()) +
                                       ", q has " + std::to_string(q.size()) + " entries)");
  }
  if (!Q.allFinite() || !q.allFinite()) {
    throw Error(ErrorCode::kInvalidObjective, "quadratic objective has non-finite entries");
  }
  const double asym = (Q - Q.transpose()).norm();
  if (asym > kSymmetryTolerance) {
    throw Error(ErrorCode::kInvalidObjective,
                "Q is not symmetric (||Q - Q^T||_F = " + std::to_string(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Q, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "eigensolver failed while validating Q");
  }
  if (solver.eigenvalues()[0] < -kPsdTolerance) {
    throw Error(ErrorCode::kInvalidObjective,
                "Q is not positive semidefinite (min eigenvalue " +
                    std::to_string(solver.eigenvalues()[0]) + ")");
  }
  return LocalObjective(std::move(Q), std::move(q), {});
}

LocalObjective LocalObjective::with_trig(std::vector<TrigTerm> terms) const {
  std::vector<TrigTerm> all = trig_;
  all.insert(all.end(), terms.begin(), terms.end());
  return LocalObjective(Q_, q_, std::move(all));
}

void LocalObjective::check_dim(Eigen::Index size) const {
  if (size != q_.size()) {
    throw Error(ErrorCode::kShape, "objective of dimension " + std::to_string(q_.size()) +
                                       " evaluated at a point of dimension " +
                                       std::to_string(size));
  }
}

double LocalObjective::value(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  check_dim(z.size());
  double v = 0.5 * z.dot(Q_ * z) + q_.dot(z);
  for (const TrigTerm& t : trig_) {
    v += t.amplitude * (t.shape == TrigShape::kSin ? z.array().sin().sum() : z.array().cos().sum());
  }
  return v;
}

void LocalObjective::gradient_into(const Eigen::Ref<const Eigen::VectorXd>& z,
                                   Eigen::Ref<Eigen::VectorXd> out) const {
  check_dim(z.size());
  out.noalias() = Q_ * z;
  out += q_;
  for (const TrigTerm& t : trig_) {
    if (t.shape == TrigShape::kSin) {
      out.array() += t.amplitude * z.array().cos();
    } else {
      out.array() -= t.amplitude * z.array().sin();
    }
  }
}

Eigen::VectorXd LocalObjective::gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  Eigen::VectorXd g(q_.size());
  gradient_into(z, g);
  return g;
}

Eigen::MatrixXd LocalObjective::hessian(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  check_dim(z.size());
  Eigen::MatrixXd H = Q_;
  for (const TrigTerm& t : trig_) {
    if (t.shape == TrigShape::kSin) {
      H.diagonal().array() -= t.amplitude * z.array().sin();
    } else {
      H.diagonal().array() -= t.amplitude * z.array().cos();
    }
  }
  return H;
}

ObjectiveSet::ObjectiveSet(std::vector<LocalObjective> locals, std::optional<std::uint64_t> seed)
    : locals_(std::move(locals)), seed_(seed) {
  if (locals_.empty()) {
    throw Error(ErrorCode::kInvalidObjective, "objective set needs at least one local cost");
  }
  const int n = locals_.front().dim();
  for (std::size_t i = 1; i < locals_.size(); ++i) {
    if (locals_[i].dim() != n) {
      throw Error(ErrorCode::kShape, "local cost " + std::to_string(i) + " has dimension " +
                                         std::to_string(locals_[i].dim()) + ", expected " +
                                         std::to_string(n));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sum_Q(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "eigensolver failed on the summed Hessian");
  }
  const NetTrig net = net_trig(locals_);
  const double trig_bound = std::abs(net.sin_amplitude) + std::abs(net.cos_amplitude);
  m_global_ = solver.eigenvalues()[0] - trig_bound;
  l_global_ = solver.eigenvalues()[n - 1] + trig_bound;
  if (!(m_global_ > 0.0)) {
    throw Error(ErrorCode::kInvalidObjective,
                "summed cost is not strongly convex (curvature lower bound " +
                    std::to_string(m_global_) + ")");
  }
}

bool ObjectiveSet::is_quadratic() const noexcept {
  for (const auto& f : locals_) {
    if (!f.is_quadratic()) return false;
  }
  return true;
}

Eigen::MatrixXd ObjectiveSet::sum_Q() const {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& f : locals_) S += f.Q();
  return S;
}

Eigen::VectorXd ObjectiveSet::sum_q() const {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(dim());
  for (const auto& f : locals_) s += f.q();
  return s;
}

double ObjectiveSet::sum_value(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  double v = 0.0;
  for (const auto& f : locals_) v += f.value(z);
  return v;
}

Eigen::VectorXd ObjectiveSet::sum_gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (const auto& f : locals_) g += f.gradient(z);
  return g;
}

Eigen::MatrixXd ObjectiveSet::sum_hessian(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& f : locals_) H += f.hessian(z);
  return H;
}

Eigen::VectorXd grad_local(const LocalObjective& objective, const Eigen::VectorXd& z) {
  return objective.gradient(z);
}

void stacked_grad_into(const ObjectiveSet& set, const Eigen::Ref<const Eigen::VectorXd>& x,
                       Eigen::Ref<Eigen::VectorXd> out) {
  const int n = set.dim();
  const Eigen::Index total = static_cast<Eigen::Index>(set.n_agents()) * n;
  if (x.size() != total || out.size() != total) {
    throw Error(ErrorCode::kShape, "stacked gradient expects length " + std::to_string(total) +
                                       ", got " + std::to_string(x.size()));
  }
  for (int i = 0; i < set.n_agents(); ++i) {
    set.local(i).gradient_into(x.segment(static_cast<Eigen::Index>(i) * n, n),
                               out.segment(static_cast<Eigen::Index>(i) * n, n));
  }
}

Eigen::VectorXd stacked_grad(const ObjectiveSet& set, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  stacked_grad_into(set, x, out);
  return out;
}

Eigen::VectorXd newton_minimizer(const ObjectiveSet& set, double tol, int max_iterations) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(set.dim());
  Eigen::VectorXd g = set.sum_gradient(z);
  for (int it = 0; it < max_iterations; ++it) {
    if (g.norm() <= std::max(tol, roundoff_floor(set, z))) return z;

    const Eigen::MatrixXd H = set.sum_hessian(z);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = -ldlt.solve(g);
    } else {
      // Locally indefinite: fall back to the strong-convexity bound as a
      // scaled gradient step.
      step = -g / set.l_global();
    }

    // Backtracking by halving on the gradient norm, which is what the
    // stopping test measures.
    const double g_norm = g.norm();
    double t = 1.0;
    Eigen::VectorXd trial = z + step;
    Eigen::VectorXd g_trial = set.sum_gradient(trial);
    for (int halvings = 0; halvings < 60 && g_trial.norm() >= g_norm; ++halvings) {
      t *= 0.5;
      trial = z + t * step;
      g_trial = set.sum_gradient(trial);
    }
    if (g_trial.norm() >= g_norm) {
      // No decrease is possible in floating point; accept only if at the floor.
      if (g_norm <= std::max(tol, 4.0 * roundoff_floor(set, z))) return z;
      break;
    }
    z = std::move(trial);
    g = std::move(g_trial);
  }
  if (g.norm() <= std::max(tol, roundoff_floor(set, z))) return z;
  throw Error(ErrorCode::kOracleFailure,
              "Newton minimizer did not converge in " + std::to_string(max_iterations) +
                  " iterations (final gradient norm " + std::to_string(g.norm()) + ")");
}

Eigen::VectorXd central_minimizer(const ObjectiveSet& set, double tol) {
  if (!set.is_quadratic()) return newton_minimizer(set, tol);

  const Eigen::MatrixXd S = set.sum_Q();
  const Eigen::VectorXd rhs = -set.sum_q();
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kOracleFailure, "summed Hessian is not positive definite");
  }
  Eigen::VectorXd z = llt.solve(rhs);
  // Two rounds of iterative refinement.
  for (int round = 0; round < 2; ++round) {
    const Eigen::VectorXd residual = rhs - S * z;
    if (residual.norm() <= std::max(tol, roundoff_floor(set, z))) break;
    z += llt.solve(residual);
  }
  return z;
}

ObjectiveSet random_quadratic_set(int n_agents, int dim, std::uint64_t seed) {
  if (n_agents < 1 || dim < 1) {
    throw Error(ErrorCode::kInvalidObjective, "random quadratic set needs N >= 1 and n >= 1");
  }
  for (std::uint64_t s = seed;; ++s) {
    Rng rng(s);
    std::vector<LocalObjective> locals;
    locals.reserve(static_cast<std::size_t>(n_agents));
    for (int i = 0; i < n_agents; ++i) {
      const Eigen::MatrixXd A = rng.uniform_matrix(dim, dim, 0.0, 1.0);
      Eigen::MatrixXd Q = A.transpose() * A / static_cast<double>(dim);
      Q = 0.5 * (Q + Q.transpose());
      Eigen::VectorXd q = rng.uniform_vector(dim, -5.0, 5.0);
      locals.push_back(LocalObjective::quadratic(std::move(Q), std::move(q)));
    }
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& f : locals) S += f.Q();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S, Eigen::EigenvaluesOnly);
    if (solver.info() == Eigen::Success && solver.eigenvalues()[0] > kDegenerateCurvature) {
      return ObjectiveSet(std::move(locals), s);
    }
  }
}

ObjectiveSet example1_trig_set(const ObjectiveSet& base) {
  if (base.n_agents() != 4) {
    throw Error(ErrorCode::kInvalidBenchmark,
                "the trig-perturbed benchmark needs exactly 4 local costs, got " +
                    std::to_string(base.n_agents()));
  }
  const TrigTerm perturbations[4] = {
      {TrigShape::kSin, 1.0},
      {TrigShape::kSin, -1.0},
      {TrigShape::kCos, -5.0},
      {TrigShape::kCos, 5.0},
  };
  std::vector<LocalObjective> locals;
  locals.reserve(4);
  for (int i = 0; i < 4; ++i) locals.push_back(base.local(i).with_trig({perturbations[i]}));
  return ObjectiveSet(std::move(locals), base.seed());
}

}  // namespace pidflow
