#pragma once

#include <memory>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "pidflow/graph.hpp"
#include "pidflow/objectives.hpp"

namespace pidflow {

enum class Variant {
  kFirstOrderPid,   // (I + c3 L) xdot = -c1 grad f - c2 L x - lambda,  lambdadot = c4 L x
  kSecondOrderPid,  // vdot = -c1 grad f - c2 L x - c3 lambda - c4 L v - c5 v, lambdadot = L x
  kCorollary,       // integral term c3 L lambda instead of c3 lambda
  kZhu2022,         // kCorollary with c5 = 0
};

std::string_view to_string(Variant variant) noexcept;
std::optional<Variant> parse_variant(std::string_view name) noexcept;
bool has_velocity(Variant variant) noexcept;

struct Gains {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
};

/// c4 = 1 and c3 = c5 = c2: the degenerate second-order configuration that
/// matches a plain gradient-flow scheme after the change v -> v + L x.
Gains preset_remark4(const Gains& base);

/// Throws kInvalidGains unless the gains used by the variant are positive.
/// The corollary variant tolerates c5 = 0; Zhu2022 ignores c5.
void validate_gains(Variant variant, const Gains& gains);

/// Stacked agent state packed as [x; lambda; v]. Each part stacks N blocks of
/// dimension n; v is present only for the second-order variants.
class SystemState {
 public:
  SystemState(int n_agents, int dim, bool with_velocity);
  SystemState(int n_agents, int dim, bool with_velocity, Eigen::VectorXd packed);

  int n_agents() const noexcept { return n_agents_; }
  int dim() const noexcept { return dim_; }
  bool has_velocity() const noexcept { return with_velocity_; }
  Eigen::Index block_length() const noexcept {
    return static_cast<Eigen::Index>(n_agents_) * dim_;
  }

  auto x() { return data_.segment(0, block_length()); }
  auto x() const { return data_.segment(0, block_length()); }
  auto lambda() { return data_.segment(block_length(), block_length()); }
  auto lambda() const { return data_.segment(block_length(), block_length()); }
  auto v() { return data_.segment(2 * block_length(), velocity_length()); }
  auto v() const { return data_.segment(2 * block_length(), velocity_length()); }

  const Eigen::VectorXd& packed() const noexcept { return data_; }
  Eigen::VectorXd& packed() noexcept { return data_; }

  /// (1^T kron I_n) lambda.
  Eigen::VectorXd lambda_sum() const;

  friend bool operator==(const SystemState& a, const SystemState& b) {
    return a.n_agents_ == b.n_agents_ && a.dim_ == b.dim_ && a.with_velocity_ == b.with_velocity_ &&
           a.data_ == b.data_;
  }

 private:
  Eigen::Index velocity_length() const noexcept { return with_velocity_ ? block_length() : 0; }

  int n_agents_;
  int dim_;
  bool with_velocity_;
  Eigen::VectorXd data_;
};

/// Mean of the N blocks of a stacked vector.
Eigen::VectorXd block_mean(const Eigen::VectorXd& stacked, int n_agents, int dim);
/// Sum of the N blocks of a stacked vector.
Eigen::VectorXd block_sum(const Eigen::VectorXd& stacked, int n_agents, int dim);
/// 1_N kron z.
Eigen::VectorXd consensus_vector(const Eigen::VectorXd& z, int n_agents);

/// A variant with its gains, bound to a graph and an objective set.
///
/// Evaluation is const and allocation-local, so one instance can be shared
/// by concurrent integrations. For the first-order variant the constructor
/// factors the N x N matrix (I + c3 L) once and applies it to each of the n
/// coordinate slices.
class Dynamics {
 public:
  Dynamics(Variant variant, const Gains& gains, std::shared_ptr<const LaplacianBundle> bundle,
           std::shared_ptr<const ObjectiveSet> objectives);

  Variant variant() const noexcept { return variant_; }
  /// Gains as used by the vector field (c5 = 0 for Zhu2022).
  const Gains& gains() const noexcept { return gains_; }
  const LaplacianBundle& bundle() const noexcept { return *bundle_; }
  const ObjectiveSet& objectives() const noexcept { return *objectives_; }
  std::shared_ptr<const LaplacianBundle> bundle_ptr() const noexcept { return bundle_; }
  std::shared_ptr<const ObjectiveSet> objectives_ptr() const noexcept { return objectives_; }
  int n_agents() const noexcept { return bundle_->n_agents(); }
  int dim() const noexcept { return objectives_->dim(); }
  bool has_velocity() const noexcept { return pidflow::has_velocity(variant_); }
  Eigen::Index packed_size() const noexcept;

  /// Defaults: lambda0 = 0, v0 = 0. lambda0 must have zero block sum
  /// (to 1e-12); v0 is rejected for the first-order variant.
  SystemState init_state(const Eigen::VectorXd& x0,
                         const std::optional<Eigen::VectorXd>& v0 = std::nullopt,
                         const std::optional<Eigen::VectorXd>& lambda0 = std::nullopt) const;

  /// Vector field on the packed layout.
  void evaluate(const Eigen::Ref<const Eigen::VectorXd>& state,
                Eigen::Ref<Eigen::VectorXd> derivative) const;
  SystemState derivative(const SystemState& state) const;

  /// The equilibrium with x = 1 kron z_star, v = 0, and lambda solving the
  /// stationarity equation with zero block sum.
  SystemState equilibrium(const Eigen::VectorXd& z_star) const;

  /// Euclidean norm of the full derivative at state.
  double equilibrium_residual(const SystemState& state) const;

  /// Applies (I + c3 L)^{-1} kron I_n. First-order variant only.
  Eigen::VectorXd solve_first_order_system(const Eigen::VectorXd& rhs) const;

 private:
  void check_state(const SystemState& state) const;
  void first_order_field(const Eigen::Ref<const Eigen::VectorXd>& y,
                         Eigen::Ref<Eigen::VectorXd> dydt) const;
  void second_order_field(const Eigen::Ref<const Eigen::VectorXd>& y,
                          Eigen::Ref<Eigen::VectorXd> dydt) const;

  Variant variant_;
  Gains gains_;
  std::shared_ptr<const LaplacianBundle> bundle_;
  std::shared_ptr<const ObjectiveSet> objectives_;
  Eigen::LLT<Eigen::MatrixXd> first_order_factor_;
};

}  // namespace pidflow
