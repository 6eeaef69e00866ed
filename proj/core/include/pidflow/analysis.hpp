#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pidflow/dynamics.hpp"
#include "pidflow/graph.hpp"
#include "pidflow/integrator.hpp"
#include "pidflow/objectives.hpp"

namespace pidflow {

/// Per-recorded-state convergence diagnostics.
///
/// relative_error is ||x(t) - 1 kron z*|| / ||x(0) - 1 kron z*||. When the run
/// starts at the optimum the ratio is undefined; the series then holds the
/// absolute error and `absolute_error` is set.
struct MetricsSeries {
  std::vector<double> times;
  std::vector<double> relative_error;
  std::vector<double> consensus_error;      // ||(L kron I) x||
  std::vector<double> optimality_residual;  // ||sum_i grad f_i(x_i)||
  std::vector<double> lambda_sum_drift;     // ||(1^T kron I) lambda||_inf
  bool absolute_error = false;
  double initial_error = 0.0;
  Eigen::VectorXd z_star;
};

MetricsSeries metrics(const Trajectory& trajectory, const ObjectiveSet& set,
                      const LaplacianBundle& bundle);
/// Same, against a precomputed minimizer.
MetricsSeries metrics(const Trajectory& trajectory, const ObjectiveSet& set,
                      const LaplacianBundle& bundle, const Eigen::VectorXd& z_star);

struct RateFit {
  double rate = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

inline constexpr double kRateFitFloor = 1e2 * std::numeric_limits<double>::epsilon();

/// Least-squares slope of log(error) against time over the last `window`
/// fraction of the time span. The window is cut at the first sample that is
/// non-positive or below `floor`. Throws kInsufficientData with fewer than 5
/// usable samples.
RateFit fit_rate(std::span<const double> times, std::span<const double> errors,
                 double window = 0.5, double floor = kRateFitFloor);

/// ||x - 1 kron z*||^2 split into the disagreement part ||Pi x||^2 and the
/// mean part N ||xbar - z*||^2.
struct ErrorSplit {
  double total_sq = 0.0;
  double disagreement_sq = 0.0;
  double mean_sq = 0.0;
};
ErrorSplit split_error(const Eigen::VectorXd& x, const Eigen::VectorXd& z_star, int n_agents,
                       int dim);

/// Weights of the first-order Lyapunov function. q is tied to w by
/// q = 1 / (w (c4 w - c2)), which requires c4 w > c2.
struct LyapunovConfig {
  double w = 0.0;
  double q = 0.0;
  double beta = 0.0;  // c3 lambda_max(L) + 1

  static LyapunovConfig from_w(const Gains& gains, const LaplacianBundle& bundle, double w);
};

/// V = 1/2 (x - x*)^T (c3 L + I)(x - x*) + q/2 theta^T (Gamma kron I) theta with
/// theta = (I + c3 L)(x - x*) + w (lambda + c1 grad f(x*)).
double lyapunov_value(const SystemState& state, const Eigen::VectorXd& x_star,
                      const ObjectiveSet& set, const LaplacianBundle& bundle, const Gains& gains,
                      const LyapunovConfig& config);

struct LyapunovSearchResult {
  bool found = false;
  double w = 0.0;
  int doublings = 0;
  std::vector<double> values;  // V(t_k) for the returned w
  double max_increase = 0.0;   // largest V(t_{k+1}) - V(t_k)
};

/// Doubles w from 2 c2 / c4 + 1 (capped at 2^30) until V is non-increasing
/// along the trajectory within tolerance * V(0).
LyapunovSearchResult lyapunov_search(const Trajectory& trajectory, const Eigen::VectorXd& x_star,
                                     const ObjectiveSet& set, const LaplacianBundle& bundle,
                                     const Gains& gains, double tolerance = 1e-10);

/// Constants of ||exp(-A t)|| <= gamma exp(-eta t): eta is the smallest real
/// part of the spectrum and gamma the condition number of the eigenvector
/// basis (1 for symmetric A).
struct ExponentialBound {
  double eta = 0.0;
  double gamma = 0.0;
};
ExponentialBound exponential_bound(const Eigen::MatrixXd& A);

/// blockdiag(c4 L + I, I, I).
Eigen::MatrixXd contraction_reference_matrix(const LaplacianBundle& bundle, double c4);

/// Sufficient-condition report for the second-order variants.
struct ConditionReport {
  Variant variant = Variant::kSecondOrderPid;
  double sigma = 0.0;
  double sigma1 = 0.0;
  double eta = 0.0;
  double gamma_const = 0.0;
  bool satisfied = false;
  double predicted_rate = 0.0;   // eta - gamma * sigma
  bool sigma_below_sigma1_minus_one = false;
  double l_global = 0.0;
  double lambda_max_LtL = 0.0;
};

/// Throws kInvalidConfig for first_order_pid. Never blocks on an unsatisfied
/// condition.
ConditionReport check_condition(Variant variant, const Gains& gains, double l_global,
                                const LaplacianBundle& bundle);

/// Flat "key = value" lines.
std::string to_key_value(const ConditionReport& report);

}  // namespace pidflow
