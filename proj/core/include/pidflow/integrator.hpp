#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pidflow/dynamics.hpp"

namespace pidflow {

struct IntegratorConfig {
  double h = 1e-3;
  double t_end = 20.0;
  int record_stride = 10;

  /// Throws kInvalidConfig unless h > 0, t_end >= h and record_stride >= 1.
  void validate() const;
};

/// States with a component above this magnitude count as diverged.
inline constexpr double kDivergenceThreshold = 1e12;

/// h * (c1 l + c2 lambda_max(L) + c4 lambda_max(L) + c5): a rough bound on the
/// stiffness seen by one RK4 step.
double stability_indicator(const Gains& gains, double l_global, double lambda_max_L, double h);

/// Returns a message when the indicator exceeds 2.5. Advisory only.
std::optional<std::string> stability_warning(const Gains& gains, double l_global,
                                             double lambda_max_L, double h);

using VectorField =
    std::function<void(const Eigen::Ref<const Eigen::VectorXd>&, Eigen::Ref<Eigen::VectorXd>)>;

/// One classical RK4 step. Throws DivergenceError if any stage produces a
/// non-finite value; `time` only labels the error.
Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& state, double h,
                         double time = 0.0);

struct StateLayout {
  int n_agents = 1;
  int dim = 1;
  bool has_velocity = false;
};

struct TrajectoryMetadata {
  std::optional<Variant> variant;
  Gains gains;
  std::optional<std::uint64_t> seed;
  IntegratorConfig config;
};

/// Recorded states at times[k]; times[0] = 0 and states[0] is the initial
/// state. Recording happens every record_stride steps plus the final step.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  StateLayout layout;
  TrajectoryMetadata metadata;

  std::size_t size() const noexcept { return times.size(); }
  SystemState state(std::size_t k) const;
};

struct DivergenceInfo {
  double time = 0.0;
  std::size_t component = 0;
  double value = 0.0;
  std::string message;
};

/// Trajectory plus, when the run stopped early, where it blew up. On
/// divergence the trajectory holds everything recorded before the failure.
struct IntegrationResult {
  Trajectory trajectory;
  std::optional<DivergenceInfo> divergence;
};

IntegrationResult integrate_until_divergence(const VectorField& field, const Eigen::VectorXd& y0,
                                             const IntegratorConfig& cfg);
IntegrationResult integrate_until_divergence(const Dynamics& dynamics, const SystemState& initial,
                                             const IntegratorConfig& cfg,
                                             std::optional<std::uint64_t> seed = std::nullopt);

/// Same as above but throws DivergenceError instead of returning a partial
/// result.
Trajectory integrate(const VectorField& field, const Eigen::VectorXd& y0,
                     const IntegratorConfig& cfg);
Trajectory integrate(const Dynamics& dynamics, const SystemState& initial,
                     const IntegratorConfig& cfg, std::optional<std::uint64_t> seed = std::nullopt);

VectorField as_vector_field(const Dynamics& dynamics);

}  // namespace pidflow
