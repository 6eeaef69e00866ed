#include "pidflow/dynamics.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pidflow/errors.hpp"

namespace pidflow {

namespace {

constexpr double kLambdaSumTolerance = 1e-12;

void require_positive(double value, const char* name, Variant variant) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidGains, std::string(name) + " must be positive for " +
                                              std::string(to_string(variant)) + ", got " +
                                              std::to_string(value));
  }
}

}  // namespace

std::string_view to_string(Variant variant) noexcept {
  switch (variant) {
    case Variant::kFirstOrderPid: return "first_order_pid";
    case Variant::kSecondOrderPid: return "second_order_pid";
    case Variant::kCorollary: return "corollary";
    case Variant::kZhu2022: return "zhu2022";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) noexcept {
  for (Variant v : {Variant::kFirstOrderPid, Variant::kSecondOrderPid, Variant::kCorollary,
                    Variant::kZhu2022}) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

bool has_velocity(Variant variant) noexcept { return variant != Variant::kFirstOrderPid; }

Gains preset_remark4(const Gains& base) {
  return Gains{base.c1, base.c2, base.c2, 1.0, base.c2};
}

void validate_gains(Variant variant, const Gains& gains) {
  require_positive(gains.c1, "c1", variant);
  require_positive(gains.c2, "c2", variant);
  require_positive(gains.c3, "c3", variant);
  require_positive(gains.c4, "c4", variant);
  switch (variant) {
    case Variant::kFirstOrderPid:
    case Variant::kZhu2022:
      break;
    case Variant::kSecondOrderPid:
      require_positive(gains.c5, "c5", variant);
      break;
    case Variant::kCorollary:
      if (!(gains.c5 >= 0.0) || !std::isfinite(gains.c5)) {
        throw Error(ErrorCode::kInvalidGains,
                    "c5 must be nonnegative for corollary, got " + std::to_string(gains.c5));
      }
      break;
  }
}

SystemState::SystemState(int n_agents, int dim, bool with_velocity)
    : SystemState(n_agents, dim, with_velocity,
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_agents) * dim *
                                        (with_velocity ? 3 : 2))) {}

SystemState::SystemState(int n_agents, int dim, bool with_velocity, Eigen::VectorXd packed)
    : n_agents_(n_agents), dim_(dim), with_velocity_(with_velocity), data_(std::move(packed)) {
  if (n_agents < 1 || dim < 1) {
    throw Error(ErrorCode::kShape, "state needs at least one agent and dimension one");
  }
  const Eigen::Index expected = block_length() * (with_velocity ? 3 : 2);
  if (data_.size() != expected) {
    throw Error(ErrorCode::kShape, "packed state has length " + std::to_string(data_.size()) +
                                       ", expected " + std::to_string(expected));
  }
}

Eigen::VectorXd SystemState::lambda_sum() const {
  return block_sum(lambda(), n_agents_, dim_);
}

Eigen::VectorXd block_sum(const Eigen::VectorXd& stacked, int n_agents, int dim) {
  if (stacked.size() != static_cast<Eigen::Index>(n_agents) * dim) {
    throw Error(ErrorCode::kShape, "stacked vector length mismatch in block_sum");
  }
  Eigen::Map<const Eigen::MatrixXd> blocks(stacked.data(), dim, n_agents);
  return blocks.rowwise().sum();
}

Eigen::VectorXd block_mean(const Eigen::VectorXd& stacked, int n_agents, int dim) {
  return block_sum(stacked, n_agents, dim) / static_cast<double>(n_agents);
}

Eigen::VectorXd consensus_vector(const Eigen::VectorXd& z, int n_agents) {
  return z.replicate(n_agents, 1);
}

Dynamics::Dynamics(Variant variant, const Gains& gains,
                   std::shared_ptr<const LaplacianBundle> bundle,
                   std::shared_ptr<const ObjectiveSet> objectives)
    : variant_(variant),
      gains_(gains),
      bundle_(std::move(bundle)),
      objectives_(std::move(objectives)) {
  if (!bundle_ || !objectives_) {
    throw Error(ErrorCode::kInvalidConfig, "dynamics need a graph bundle and an objective set");
  }
  if (variant_ == Variant::kZhu2022) gains_.c5 = 0.0;
  validate_gains(variant_, gains_);
  if (bundle_->n_agents() != objectives_->n_agents()) {
    throw Error(ErrorCode::kShape, "graph has " + std::to_string(bundle_->n_agents()) +
                                       " agents but the objective set has " +
                                       std::to_string(objectives_->n_agents()));
  }
  if (variant_ == Variant::kFirstOrderPid) {
    const int n = bundle_->n_agents();
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + gains_.c3 * bundle_->laplacian;
    first_order_factor_.compute(M);
    if (first_order_factor_.info() != Eigen::Success) {
      throw Error(ErrorCode::kNumerical, "factorization of I + c3 L failed");
    }
  }
}

Eigen::Index Dynamics::packed_size() const noexcept {
  return static_cast<Eigen::Index>(n_agents()) * dim() * (has_velocity() ? 3 : 2);
}

SystemState Dynamics::init_state(const Eigen::VectorXd& x0, const std::optional<Eigen::VectorXd>& v0,
                                 const std::optional<Eigen::VectorXd>& lambda0) const {
  SystemState state(n_agents(), dim(), has_velocity());
  const Eigen::Index len = state.block_length();
  if (x0.size() != len) {
    throw Error(ErrorCode::kShape,
                "x0 has length " + std::to_string(x0.size()) + ", expected " + std::to_string(len));
  }
  state.x() = x0;
  if (lambda0) {
    if (lambda0->size() != len) {
      throw Error(ErrorCode::kShape, "lambda0 has length " + std::to_string(lambda0->size()) +
                                         ", expected " + std::to_string(len));
    }
    const Eigen::VectorXd sum = block_sum(*lambda0, n_agents(), dim());
    if (sum.lpNorm<Eigen::Infinity>() > kLambdaSumTolerance) {
      throw Error(ErrorCode::kInvalidInit,
                  "lambda0 blocks must sum to zero (max |sum| = " +
                      std::to_string(sum.lpNorm<Eigen::Infinity>()) + ")");
    }
    state.lambda() = *lambda0;
  }
  if (v0) {
    if (!has_velocity()) {
      throw Error(ErrorCode::kInvalidInit, "first_order_pid has no velocity state");
    }
    if (v0->size() != len) {
      throw Error(ErrorCode::kShape,
                  "v0 has length " + std::to_string(v0->size()) + ", expected " + std::to_string(len));
    }
    state.v() = *v0;
  }
  return state;
}

void Dynamics::check_state(const SystemState& state) const {
  if (state.n_agents() != n_agents() || state.dim() != dim() ||
      state.has_velocity() != has_velocity()) {
    throw Error(ErrorCode::kShape, "state layout does not match " +
                                       std::string(to_string(variant_)) + " with N=" +
                                       std::to_string(n_agents()) + ", n=" + std::to_string(dim()));
  }
}

Eigen::VectorXd Dynamics::solve_first_order_system(const Eigen::VectorXd& rhs) const {
  if (variant_ != Variant::kFirstOrderPid) {
    throw Error(ErrorCode::kNumerical, "I + c3 L is only factored for first_order_pid");
  }
  const int N = n_agents();
  const int n = dim();
  if (rhs.size() != static_cast<Eigen::Index>(N) * n) {
    throw Error(ErrorCode::kShape, "right-hand side length mismatch");
  }
  // Blocks are columns of an n x N matrix; the solve acts on its rows.
  Eigen::Map<const Eigen::MatrixXd> R(rhs.data(), n, N);
  Eigen::VectorXd out(rhs.size());
  Eigen::Map<Eigen::MatrixXd> X(out.data(), n, N);
  X = first_order_factor_.solve(R.transpose()).transpose();
  return out;
}

void Dynamics::first_order_field(const Eigen::Ref<const Eigen::VectorXd>& y,
                                 Eigen::Ref<Eigen::VectorXd> dydt) const {
  const Eigen::Index len = static_cast<Eigen::Index>(n_agents()) * dim();
  const auto x = y.segment(0, len);
  const auto lambda = y.segment(len, len);

  Eigen::VectorXd grad(len);
  stacked_grad_into(*objectives_, x, grad);
  Eigen::VectorXd Lx(len);
  kron_apply_into(bundle_->laplacian, dim(), x, Lx);

  const Eigen::VectorXd rhs = -gains_.c1 * grad - gains_.c2 * Lx - lambda;
  dydt.segment(0, len) = solve_first_order_system(rhs);
  dydt.segment(len, len) = gains_.c4 * Lx;
}

void Dynamics::second_order_field(const Eigen::Ref<const Eigen::VectorXd>& y,
                                  Eigen::Ref<Eigen::VectorXd> dydt) const {
  const Eigen::Index len = static_cast<Eigen::Index>(n_agents()) * dim();
  const auto x = y.segment(0, len);
  const auto lambda = y.segment(len, len);
  const auto v = y.segment(2 * len, len);
  const Eigen::MatrixXd& L = bundle_->laplacian;

  Eigen::VectorXd grad(len);
  stacked_grad_into(*objectives_, x, grad);
  Eigen::VectorXd Lx(len);
  kron_apply_into(L, dim(), x, Lx);
  Eigen::VectorXd Lv(len);
  kron_apply_into(L, dim(), v, Lv);

  auto vdot = dydt.segment(2 * len, len);
  vdot = -gains_.c1 * grad - gains_.c2 * Lx - gains_.c4 * Lv - gains_.c5 * v;
  if (variant_ == Variant::kSecondOrderPid) {
    vdot -= gains_.c3 * lambda;
  } else {
    Eigen::VectorXd Llambda(len);
    kron_apply_into(L, dim(), lambda, Llambda);
    vdot -= gains_.c3 * Llambda;
  }
  dydt.segment(0, len) = v;
  dydt.segment(len, len) = Lx;
}

void Dynamics::evaluate(const Eigen::Ref<const Eigen::VectorXd>& state,
                        Eigen::Ref<Eigen::VectorXd> derivative) const {
  if (state.size() != packed_size() || derivative.size() != packed_size()) {
    throw Error(ErrorCode::kShape, "packed state has length " + std::to_string(state.size()) +
                                       ", expected " + std::to_string(packed_size()));
  }
  if (variant_ == Variant::kFirstOrderPid) {
    first_order_field(state, derivative);
  } else {
    second_order_field(state, derivative);
  }
}

SystemState Dynamics::derivative(const SystemState& state) const {
  check_state(state);
  SystemState out(n_agents(), dim(), has_velocity());
  evaluate(state.packed(), out.packed());
  return out;
}

SystemState Dynamics::equilibrium(const Eigen::VectorXd& z_star) const {
  if (z_star.size() != dim()) {
    throw Error(ErrorCode::kShape, "z* has dimension " + std::to_string(z_star.size()) +
                                       ", expected " + std::to_string(dim()));
  }
  SystemState state(n_agents(), dim(), has_velocity());
  state.x() = consensus_vector(z_star, n_agents());
  const Eigen::VectorXd grad = stacked_grad(*objectives_, state.x());
  switch (variant_) {
    case Variant::kFirstOrderPid:
      state.lambda() = -gains_.c1 * grad;
      break;
    case Variant::kSecondOrderPid:
      state.lambda() = -(gains_.c1 / gains_.c3) * grad;
      break;
    case Variant::kCorollary:
    case Variant::kZhu2022:
      // grad has zero block sum at the optimum, so L Gamma grad = grad.
      state.lambda() = -(gains_.c1 / gains_.c3) * kron_apply(bundle_->gamma, dim(), grad);
      break;
  }
  return state;
}

double Dynamics::equilibrium_residual(const SystemState& state) const {
  return derivative(state).packed().norm();
}

}  // namespace pidflow
