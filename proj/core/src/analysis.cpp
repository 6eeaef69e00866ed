#include "pidflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>

#include "pidflow/errors.hpp"

namespace pidflow {

MetricsSeries metrics(const Trajectory& trajectory, const ObjectiveSet& set,
                      const LaplacianBundle& bundle) {
  return metrics(trajectory, set, bundle, central_minimizer(set));
}

MetricsSeries metrics(const Trajectory& trajectory, const ObjectiveSet& set,
                      const LaplacianBundle& bundle, const Eigen::VectorXd& z_star) {
  const int N = trajectory.layout.n_agents;
  const int n = trajectory.layout.dim;
  if (N != set.n_agents() || n != set.dim() || N != bundle.n_agents()) {
    throw Error(ErrorCode::kShape, "trajectory layout does not match the objective set or graph");
  }
  if (z_star.size() != n) throw Error(ErrorCode::kShape, "z* dimension mismatch");

  MetricsSeries out;
  out.z_star = z_star;
  const std::size_t count = trajectory.size();
  out.times = trajectory.times;
  out.relative_error.reserve(count);
  out.consensus_error.reserve(count);
  out.optimality_residual.reserve(count);
  out.lambda_sum_drift.reserve(count);

  const Eigen::VectorXd x_star = consensus_vector(z_star, N);
  const Eigen::Index len = static_cast<Eigen::Index>(N) * n;
  if (count > 0) out.initial_error = (trajectory.states.front().head(len) - x_star).norm();
  out.absolute_error = !(out.initial_error > 0.0);
  const double scale = out.absolute_error ? 1.0 : out.initial_error;

  Eigen::VectorXd grad(len);
  Eigen::VectorXd Lx(len);
  for (const Eigen::VectorXd& packed : trajectory.states) {
    const auto x = packed.head(len);
    const auto lambda = packed.segment(len, len);
    out.relative_error.push_back((x - x_star).norm() / scale);
    kron_apply_into(bundle.laplacian, n, x, Lx);
    out.consensus_error.push_back(Lx.norm());
    stacked_grad_into(set, x, grad);
    out.optimality_residual.push_back(block_sum(grad, N, n).norm());
    out.lambda_sum_drift.push_back(block_sum(lambda, N, n).lpNorm<Eigen::Infinity>());
  }
  return out;
}

RateFit fit_rate(std::span<const double> times, std::span<const double> errors, double window,
                 double floor) {
  if (times.size() != errors.size()) {
    throw Error(ErrorCode::kShape, "fit_rate: times and errors differ in length");
  }
  if (!(window > 0.0 && window <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "fit_rate: window must lie in (0, 1]");
  }
  if (times.size() < 5) {
    throw Error(ErrorCode::kInsufficientData, "fit_rate needs at least 5 samples");
  }
  const double t0 = times.front();
  const double t1 = times.back();
  const double t_start = t1 - window * (t1 - t0);
  const double slack = 1e-12 * std::max(1.0, std::abs(t1));

  std::vector<double> ts;
  std::vector<double> logs;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < t_start - slack) continue;
    const double e = errors[k];
    if (!(e > 0.0) || !std::isfinite(e) || e < floor) break;
    ts.push_back(times[k]);
    logs.push_back(std::log(e));
  }
  if (ts.size() < 5) {
    throw Error(ErrorCode::kInsufficientData,
                "fit_rate: only " + std::to_string(ts.size()) +
                    " usable samples in the tail window (need 5)");
  }

  const double m = static_cast<double>(ts.size());
  double t_mean = 0.0;
  double y_mean = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    t_mean += ts[k];
    y_mean += logs[k];
  }
  t_mean /= m;
  y_mean /= m;
  double stt = 0.0;
  double sty = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double dt = ts[k] - t_mean;
    const double dy = logs[k] - y_mean;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0.0)) {
    throw Error(ErrorCode::kInsufficientData, "fit_rate: samples share a single time stamp");
  }
  RateFit fit;
  fit.points = ts.size();
  fit.rate = sty / stt;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const double r = logs[k] - (y_mean + fit.rate * (ts[k] - t_mean));
    ss_res += r * r;
  }
  // A flat series is fitted exactly by a zero slope. Roundoff in the mean
  // leaves syy tiny but nonzero there.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(y_mean));
  fit.r_squared = syy > m * noise * noise ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

ErrorSplit split_error(const Eigen::VectorXd& x, const Eigen::VectorXd& z_star, int n_agents,
                       int dim) {
  const Eigen::VectorXd mean = block_mean(x, n_agents, dim);
  const Eigen::VectorXd centered = x - consensus_vector(mean, n_agents);
  ErrorSplit s;
  s.total_sq = (x - consensus_vector(z_star, n_agents)).squaredNorm();
  s.disagreement_sq = centered.squaredNorm();
  s.mean_sq = static_cast<double>(n_agents) * (mean - z_star).squaredNorm();
  return s;
}

LyapunovConfig LyapunovConfig::from_w(const Gains& gains, const LaplacianBundle& bundle, double w) {
  const double margin = gains.c4 * w - gains.c2;
  if (!(w > 0.0) || !(margin > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig,
                "Lyapunov weight w=" + std::to_string(w) + " must satisfy c4 w - c2 > 0");
  }
  LyapunovConfig c;
  c.w = w;
  c.q = 1.0 / (w * margin);
  c.beta = gains.c3 * bundle.lambda_max_L + 1.0;
  return c;
}

double lyapunov_value(const SystemState& state, const Eigen::VectorXd& x_star,
                      const ObjectiveSet& set, const LaplacianBundle& bundle, const Gains& gains,
                      const LyapunovConfig& config) {
  if (state.has_velocity()) {
    throw Error(ErrorCode::kShape, "the Lyapunov function is defined for first_order_pid states");
  }
  const int n = state.dim();
  const Eigen::VectorXd dx = state.x() - x_star;
  const Eigen::VectorXd Ldx = kron_apply(bundle.laplacian, n, dx);
  const Eigen::VectorXd g = dx + gains.c3 * Ldx;  // (I + c3 L) dx
  const Eigen::VectorXd theta =
      g + config.w * (state.lambda() + gains.c1 * stacked_grad(set, x_star));
  const double quadratic = 0.5 * dx.dot(g);
  const double coupling = 0.5 * config.q * theta.dot(kron_apply(bundle.gamma, n, theta));
  return quadratic + coupling;
}

LyapunovSearchResult lyapunov_search(const Trajectory& trajectory, const Eigen::VectorXd& x_star,
                                     const ObjectiveSet& set, const LaplacianBundle& bundle,
                                     const Gains& gains, double tolerance) {
  constexpr double kCap = 1073741824.0;  // 2^30
  LyapunovSearchResult result;
  double w = 2.0 * gains.c2 / gains.c4 + 1.0;
  for (int doublings = 0; w <= kCap; ++doublings, w *= 2.0) {
    const LyapunovConfig config = LyapunovConfig::from_w(gains, bundle, w);
    std::vector<double> values;
    values.reserve(trajectory.size());
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
      values.push_back(lyapunov_value(trajectory.state(k), x_star, set, bundle, gains, config));
    }
    double max_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < values.size(); ++k) {
      max_increase = std::max(max_increase, values[k] - values[k - 1]);
    }
    result.w = w;
    result.doublings = doublings;
    result.max_increase = max_increase;
    result.values = std::move(values);
    if (result.values.empty() || max_increase <= tolerance * result.values.front()) {
      result.found = true;
      return result;
    }
  }
  result.found = false;
  return result;
}

ExponentialBound exponential_bound(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw Error(ErrorCode::kShape, "exponential_bound needs a non-empty square matrix");
  }
  ExponentialBound bound;
  if ((A - A.transpose()).norm() <= 1e-14 * std::max(1.0, A.norm())) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (A + A.transpose()));
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::kNumerical, "eigensolver failed on the reference matrix");
    }
    bound.eta = solver.eigenvalues().minCoeff();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(solver.eigenvectors());
    const auto& s = svd.singularValues();
    bound.gamma = s[0] / s[s.size() - 1];
    return bound;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "eigensolver failed on the reference matrix");
  }
  bound.eta = solver.eigenvalues().real().minCoeff();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(solver.eigenvectors());
  const auto& s = svd.singularValues();
  bound.gamma = s[0] / s[s.size() - 1];
  return bound;
}

Eigen::MatrixXd contraction_reference_matrix(const LaplacianBundle& bundle, double c4) {
  const int N = bundle.n_agents();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3 * N, 3 * N);
  A.topLeftCorner(N, N) += c4 * bundle.laplacian;
  return A;
}

ConditionReport check_condition(Variant variant, const Gains& gains, double l_global,
                                const LaplacianBundle& bundle) {
  if (variant == Variant::kFirstOrderPid) {
    throw Error(ErrorCode::kInvalidConfig, "condition applies to second-order variants");
  }
  for (double c : {gains.c1, gains.c2, gains.c3, gains.c4, gains.c5}) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw Error(ErrorCode::kInvalidGains, "condition check needs nonnegative finite gains");
    }
  }
  const double c1 = gains.c1, c2 = gains.c2, c3 = gains.c3, c4 = gains.c4;
  const double c5 = variant == Variant::kZhu2022 ? 0.0 : gains.c5;

  ConditionReport r;
  r.variant = variant;
  r.l_global = l_global;
  r.lambda_max_LtL = bundle.lambda_max_LtL;
  const double ltl = bundle.lambda_max_LtL;
  if (variant == Variant::kSecondOrderPid) {
    const double coupling = std::sqrt((1.0 + c2 * c2 + 2.0 * c4 * c4) * ltl);
    r.sigma = std::sqrt(c1 * l_global + c3 * c3 + c5 * c5 + coupling);
    r.sigma1 = c1 * l_global + (1.0 + c3 * c3 + c5 * c5) + coupling;
  } else {
    // The integral gain moves into the Laplacian block.
    const double coupling = std::sqrt((1.0 + c2 * c2 + c3 * c3 + 2.0 * c4 * c4) * ltl);
    r.sigma = std::sqrt(c1 * l_global + c5 * c5 + coupling);
    r.sigma1 = c1 * l_global + (1.0 + c5 * c5) + coupling;
  }
  const ExponentialBound bound = exponential_bound(contraction_reference_matrix(bundle, c4));
  r.eta = bound.eta;
  r.gamma_const = bound.gamma;
  r.satisfied = r.sigma < r.eta / r.gamma_const;
  r.predicted_rate = r.eta - r.gamma_const * r.sigma;
  r.sigma_below_sigma1_minus_one = r.sigma < r.sigma1 - 1.0;
  return r;
}

std::string to_key_value(const ConditionReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "variant = " << to_string(report.variant) << '\n'
     << "sigma = " << report.sigma << '\n'
     << "sigma1 = " << report.sigma1 << '\n'
     << "eta = " << report.eta << '\n'
     << "gamma = " << report.gamma_const << '\n'
     << "satisfied = " << (report.satisfied ? "true" : "false") << '\n'
     << "predicted_rate = " << report.predicted_rate << '\n'
     << "sigma_below_sigma1_minus_1 = " << (report.sigma_below_sigma1_minus_one ? "true" : "false")
     << '\n'
     << "l_global = " << report.l_global << '\n'
     << "lambda_max_LtL = " << report.lambda_max_LtL << '\n';
  return os.str();
}

}  // namespace pidflow
