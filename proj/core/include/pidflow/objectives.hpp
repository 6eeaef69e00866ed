#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace pidflow {

enum class TrigShape { kSin, kCos };

/// amplitude * sum_k sin(z_k) or amplitude * sum_k cos(z_k). The amplitude
/// carries the sign.
struct TrigTerm {
  TrigShape shape = TrigShape::kSin;
  double amplitude = 0.0;
};

/// Local cost f_i(z) = 1/2 z^T Q z + q^T z + trig terms.
class LocalObjective {
 public:
  /// Q must be square, symmetric to 1e-12 and PSD to -1e-10.
  static LocalObjective quadratic(Eigen::MatrixXd Q, Eigen::VectorXd q);

  /// Same quadratic part with additional trig perturbations.
  LocalObjective with_trig(std::vector<TrigTerm> terms) const;

  int dim() const noexcept { return static_cast<int>(q_.size()); }
  const Eigen::MatrixXd& Q() const noexcept { return Q_; }
  const Eigen::VectorXd& q() const noexcept { return q_; }
  const std::vector<TrigTerm>& trig_terms() const noexcept { return trig_; }
  bool is_quadratic() const noexcept { return trig_.empty(); }

  double value(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  void gradient_into(const Eigen::Ref<const Eigen::VectorXd>& z, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  LocalObjective(Eigen::MatrixXd Q, Eigen::VectorXd q, std::vector<TrigTerm> trig);

  void check_dim(Eigen::Index size) const;

  Eigen::MatrixXd Q_;
  Eigen::VectorXd q_;
  std::vector<TrigTerm> trig_;
};

/// N local costs sharing a dimension, plus the strong convexity and
/// smoothness constants of their sum.
///
/// The constants come from the spectrum of sum_i Q_i widened by the net trig
/// amplitudes; when the trig terms cancel in the sum they are exact.
class ObjectiveSet {
 public:
  /// Throws kInvalidObjective when the locals disagree on dimension or the
  /// summed cost is not strongly convex.
  explicit ObjectiveSet(std::vector<LocalObjective> locals, std::optional<std::uint64_t> seed = {});

  int n_agents() const noexcept { return static_cast<int>(locals_.size()); }
  int dim() const noexcept { return locals_.front().dim(); }
  const std::vector<LocalObjective>& locals() const noexcept { return locals_; }
  const LocalObjective& local(int i) const { return locals_.at(static_cast<std::size_t>(i)); }
  double m_global() const noexcept { return m_global_; }
  double l_global() const noexcept { return l_global_; }
  /// Seed that produced this set, when it was generated.
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }
  bool is_quadratic() const noexcept;

  /// Sum of local costs evaluated at a common point z.
  double sum_value(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::VectorXd sum_gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::MatrixXd sum_hessian(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  Eigen::MatrixXd sum_Q() const;
  Eigen::VectorXd sum_q() const;

 private:
  std::vector<LocalObjective> locals_;
  double m_global_ = 0.0;
  double l_global_ = 0.0;
  std::optional<std::uint64_t> seed_;
};

Eigen::VectorXd grad_local(const LocalObjective& objective, const Eigen::VectorXd& z);

/// Block i of the result is the gradient of local i at block i of x.
Eigen::VectorXd stacked_grad(const ObjectiveSet& set, const Eigen::VectorXd& x);
void stacked_grad_into(const ObjectiveSet& set, const Eigen::Ref<const Eigen::VectorXd>& x,
                       Eigen::Ref<Eigen::VectorXd> out);

/// Minimizer of the summed cost. Pure quadratic sets use one linear solve;
/// anything with trig terms goes through damped Newton (backtracking by
/// halving, at most 100 iterations). Throws kOracleFailure when Newton does
/// not reach the tolerance.
Eigen::VectorXd central_minimizer(const ObjectiveSet& set, double tol = 1e-12);

/// Damped Newton on the summed cost regardless of structure. Exposed so the
/// linear-solve route can be cross-checked.
Eigen::VectorXd newton_minimizer(const ObjectiveSet& set, double tol = 1e-12,
                                 int max_iterations = 100);

/// N random quadratics with Q_i = A_i^T A_i / n, A_i uniform on [0, 1], and
/// q_i uniform on [-5, 5]. Deterministic in the seed; if the sum turns out
/// numerically singular the next seed is tried and recorded.
ObjectiveSet random_quadratic_set(int n_agents, int dim, std::uint64_t seed);

/// Attaches +sin, -sin, -5 cos, +5 cos to the four locals of base. The
/// perturbations cancel in the sum, so the constants are unchanged.
ObjectiveSet example1_trig_set(const ObjectiveSet& base);

}  // namespace pidflow
