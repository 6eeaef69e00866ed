#include "pidflow/integrator.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pidflow/errors.hpp"

namespace pidflow {

namespace {

std::optional<Eigen::Index> first_non_finite(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return i;
  }
  return std::nullopt;
}

std::optional<Eigen::Index> first_out_of_range(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || std::abs(v[i]) > kDivergenceThreshold) return i;
  }
  return std::nullopt;
}

DivergenceInfo info_from(const DivergenceError& e) {
  return {e.time(), e.component(), e.value(), e.what()};
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw Error(ErrorCode::kInvalidConfig, "integrator.h must be positive, got " + std::to_string(h));
  }
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw Error(ErrorCode::kInvalidConfig,
                "integrator.t_end must be positive, got " + std::to_string(t_end));
  }
  if (t_end / h < 1.0) {
    throw Error(ErrorCode::kInvalidConfig, "integrator.t_end must be at least one step h");
  }
  if (record_stride < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "integrator.record_stride must be >= 1, got " + std::to_string(record_stride));
  }
}

double stability_indicator(const Gains& gains, double l_global, double lambda_max_L, double h) {
  return h * (gains.c1 * l_global + gains.c2 * lambda_max_L + gains.c4 * lambda_max_L + gains.c5);
}

std::optional<std::string> stability_warning(const Gains& gains, double l_global,
                                             double lambda_max_L, double h) {
  const double indicator = stability_indicator(gains, l_global, lambda_max_L, h);
  if (indicator <= 2.5) return std::nullopt;
  return "step size h=" + std::to_string(h) + " may be unstable (stiffness indicator " +
         std::to_string(indicator) + " > 2.5)";
}

Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& state, double h,
                         double time) {
  const Eigen::Index size = state.size();
  Eigen::VectorXd k1(size), k2(size), k3(size), k4(size), probe(size);

  const auto check = [&](const Eigen::VectorXd& stage, int index) {
    if (auto bad = first_non_finite(stage)) {
      throw DivergenceError(time, static_cast<std::size_t>(*bad), stage[*bad],
                            "non-finite value in RK4 stage " + std::to_string(index) +
                                " at t=" + std::to_string(time) + ", component " +
                                std::to_string(*bad));
    }
  };

  field(state, k1);
  check(k1, 1);
  probe = state + 0.5 * h * k1;
  field(probe, k2);
  check(k2, 2);
  probe = state + 0.5 * h * k2;
  field(probe, k3);
  check(k3, 3);
  probe = state + h * k3;
  field(probe, k4);
  check(k4, 4);
  return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

IntegrationResult integrate_until_divergence(const VectorField& field, const Eigen::VectorXd& y0,
                                             const IntegratorConfig& cfg) {
  cfg.validate();
  IntegrationResult result;
  Trajectory& traj = result.trajectory;
  traj.layout = {1, static_cast<int>(y0.size()), false};
  traj.metadata.config = cfg;
  traj.times.push_back(0.0);
  traj.states.push_back(y0);

  // Full steps of size h, then one shorter step if t_end is not a multiple.
  const double ratio = cfg.t_end / cfg.h;
  long long full_steps = static_cast<long long>(std::floor(ratio * (1.0 + 1e-12)));
  const double remainder = cfg.t_end - static_cast<double>(full_steps) * cfg.h;
  const bool partial_step = remainder > 1e-9 * cfg.h;
  const long long total_steps = full_steps + (partial_step ? 1 : 0);

  Eigen::VectorXd y = y0;
  for (long long step = 1; step <= total_steps; ++step) {
    const bool last = step == total_steps;
    const double t_prev = static_cast<double>(step - 1) * cfg.h;
    const double h = (last && partial_step) ? remainder : cfg.h;
    const double t = last ? cfg.t_end : static_cast<double>(step) * cfg.h;
    try {
      y = rk4_step(field, y, h, t_prev);
    } catch (const DivergenceError& e) {
      result.divergence = info_from(e);
      return result;
    }
    if (auto bad = first_out_of_range(y)) {
      result.divergence = DivergenceInfo{
          t, static_cast<std::size_t>(*bad), y[*bad],
          "state component " + std::to_string(*bad) + " reached " + std::to_string(y[*bad]) +
              " at t=" + std::to_string(t) + " (threshold 1e12)"};
      return result;
    }
    if (last || step % cfg.record_stride == 0) {
      traj.times.push_back(t);
      traj.states.push_back(y);
    }
  }
  return result;
}

VectorField as_vector_field(const Dynamics& dynamics) {
  return [&dynamics](const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Ref<Eigen::VectorXd> dydt) {
    dynamics.evaluate(y, dydt);
  };
}

IntegrationResult integrate_until_divergence(const Dynamics& dynamics, const SystemState& initial,
                                             const IntegratorConfig& cfg,
                                             std::optional<std::uint64_t> seed) {
  if (initial.n_agents() != dynamics.n_agents() || initial.dim() != dynamics.dim() ||
      initial.has_velocity() != dynamics.has_velocity()) {
    throw Error(ErrorCode::kShape, "initial state layout does not match the dynamics");
  }
  IntegrationResult result = integrate_until_divergence(as_vector_field(dynamics), initial.packed(), cfg);
  result.trajectory.layout = {dynamics.n_agents(), dynamics.dim(), dynamics.has_velocity()};
  result.trajectory.metadata.variant = dynamics.variant();
  result.trajectory.metadata.gains = dynamics.gains();
  result.trajectory.metadata.seed = seed;
  return result;
}

Trajectory integrate(const VectorField& field, const Eigen::VectorXd& y0,
                     const IntegratorConfig& cfg) {
  IntegrationResult result = integrate_until_divergence(field, y0, cfg);
  if (result.divergence) {
    const DivergenceInfo& d = *result.divergence;
    throw DivergenceError(d.time, d.component, d.value, d.message);
  }
  return std::move(result.trajectory);
}

Trajectory integrate(const Dynamics& dynamics, const SystemState& initial,
                     const IntegratorConfig& cfg, std::optional<std::uint64_t> seed) {
  IntegrationResult result = integrate_until_divergence(dynamics, initial, cfg, seed);
  if (result.divergence) {
    const DivergenceInfo& d = *result.divergence;
    throw DivergenceError(d.time, d.component, d.value, d.message);
  }
  return std::move(result.trajectory);
}

SystemState Trajectory::state(std::size_t k) const {
  return SystemState(layout.n_agents, layout.dim, layout.has_velocity, states.at(k));
}

}  // namespace pidflow
