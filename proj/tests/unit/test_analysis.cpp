#include <doctest.h>

#include <cmath>
#include <vector>

#include "support.hpp"

using namespace pidflow;
using pidflow::test::code_of;

namespace {

const Gains kExample1{0.8, 2.9, 5.0, 5.0, 0.0};
const Gains kExample2{0.14, 0.65, 0.156, 0.52, 0.52};

struct Example1Run {
  std::shared_ptr<const LaplacianBundle> bundle;
  std::shared_ptr<const ObjectiveSet> set;
  Trajectory trajectory;
};

Example1Run example1_run(double t_end) {
  Example1Run r{test::bundle_ptr(Graph::ring(4)), test::set_ptr(random_quadratic_set(4, 10, 1)), {}};
  const Dynamics d(Variant::kFirstOrderPid, kExample1, r.bundle, r.set);
  Rng rng = Rng::stream(1, 1);
  r.trajectory = integrate(d, d.init_state(rng.uniform_vector(40, -1, 1)), {1e-3, t_end, 10}, 1);
  return r;
}

}  // namespace

TEST_CASE("fit_rate on synthetic series") {
  std::vector<double> t, e, flat, shifted;
  for (int k = 0; k <= 1000; ++k) {
    t.push_back(0.01 * k);
    e.push_back(std::exp(-2.0 * t.back()));
    flat.push_back(0.3);
    shifted.push_back(7.5 * e.back());
  }
  const RateFit fit = fit_rate(t, e);
  CHECK(std::abs(fit.rate + 2.0) <= 1e-6);
  CHECK(fit.r_squared >= 0.999999);
  CHECK(fit.points == 501);

  const RateFit c = fit_rate(t, flat);
  CHECK(c.rate == doctest::Approx(0.0));
  CHECK(c.r_squared == 1.0);

  CHECK(fit_rate(t, shifted).rate == doctest::Approx(fit.rate).epsilon(1e-9));
  std::vector<double> later = t;
  for (double& v : later) v += 100.0;
  CHECK(fit_rate(later, e).rate == doctest::Approx(fit.rate).epsilon(1e-9));
}

TEST_CASE("fit_rate stops at the roundoff floor") {
  std::vector<double> t, e;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(k);
    e.push_back(k < 60 ? std::exp(-0.5 * k) : 1e-300);
  }
  const RateFit fit = fit_rate(t, e, 1.0);
  CHECK(fit.rate == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("fit_rate input checks") {
  const std::vector<double> t{0, 1, 2}, e{1, 0.5, 0.25};
  CHECK(code_of([&] { fit_rate(t, e); }) == ErrorCode::kInsufficientData);
  const std::vector<double> t2{0, 1, 2, 3, 4, 5};
  CHECK(code_of([&] { fit_rate(t2, e); }) == ErrorCode::kShape);
  const std::vector<double> e2{1, 1, 1, 1, 1, 1};
  CHECK(code_of([&] { fit_rate(t2, e2, 0.0); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("consensus and mean split of the error") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd x = rng.uniform_vector(15, -3, 3);
    const Eigen::VectorXd z = rng.uniform_vector(3, -3, 3);
    const ErrorSplit s = split_error(x, z, 5, 3);
    CHECK(std::abs(s.total_sq - (s.disagreement_sq + s.mean_sq)) <= 1e-10 * s.total_sq);
  }
}

TEST_CASE("metrics series") {
  const Example1Run r = example1_run(1.0);
  const MetricsSeries m = metrics(r.trajectory, *r.set, *r.bundle);
  REQUIRE(m.times.size() == r.trajectory.size());
  CHECK(m.relative_error.front() == 1.0);
  CHECK_FALSE(m.absolute_error);
  CHECK(m.relative_error.back() < 1.0);
  for (double d : m.lambda_sum_drift) CHECK(d <= 1e-9);
  const Eigen::VectorXd x0 = r.trajectory.states.front().head(40);
  CHECK(m.consensus_error.front() == doctest::Approx(kron_apply(r.bundle->laplacian, 10, x0).norm()));

  SUBCASE("start at the optimum reports the absolute error") {
    const Dynamics d(Variant::kFirstOrderPid, kExample1, r.bundle, r.set);
    const Eigen::VectorXd z = central_minimizer(*r.set);
    const Trajectory t = integrate(d, d.equilibrium(z), {1e-2, 0.1, 1});
    const MetricsSeries frozen = metrics(t, *r.set, *r.bundle, z);
    CHECK(frozen.absolute_error);
    CHECK(frozen.initial_error == 0.0);
    for (double v : frozen.relative_error) CHECK(v < 1e-12);
  }
}

TEST_CASE("Lyapunov function") {
  const auto bundle = test::bundle_ptr(Graph::ring(4));
  const auto set = test::set_ptr(random_quadratic_set(4, 10, 1));
  const Dynamics d(Variant::kFirstOrderPid, kExample1, bundle, set);
  const Eigen::VectorXd z = central_minimizer(*set);
  const Eigen::VectorXd x_star = consensus_vector(z, 4);
  const LyapunovConfig cfg = LyapunovConfig::from_w(kExample1, *bundle, 4.0);
  CHECK(cfg.q == doctest::Approx(1.0 / (4.0 * (5.0 * 4.0 - 2.9))));

  const SystemState eq = d.equilibrium(z);
  CHECK(std::abs(lyapunov_value(eq, x_star, *set, *bundle, kExample1, cfg)) < 1e-20);

  SystemState off = eq;
  Rng rng(42);
  const Eigen::VectorXd dl = rng.uniform_vector(40, -1, 1);
  off.lambda() += dl;
  const double expected = 0.5 * cfg.q * cfg.w * cfg.w * dl.dot(kron_apply(bundle->gamma, 10, dl));
  const double V = lyapunov_value(off, x_star, *set, *bundle, kExample1, cfg);
  CHECK(V > 0.0);
  CHECK(V == doctest::Approx(expected).epsilon(1e-12));

  CHECK(code_of([&] { LyapunovConfig::from_w(kExample1, *bundle, 0.5); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("Lyapunov search along an Example-1 trajectory") {
  const Example1Run r = example1_run(4.0);
  const Eigen::VectorXd x_star = consensus_vector(central_minimizer(*r.set), 4);
  const LyapunovSearchResult s = lyapunov_search(r.trajectory, x_star, *r.set, *r.bundle, kExample1);
  REQUIRE(s.found);
  CHECK(s.w >= 2.0 * kExample1.c2 / kExample1.c4 + 1.0);
  for (std::size_t k = 1; k < s.values.size(); ++k) {
    CHECK(s.values[k] <= s.values[k - 1] + 1e-10 * s.values.front());
  }
  const double avg_rate = std::log(s.values.back() / s.values.front()) / r.trajectory.times.back();
  CHECK(avg_rate < 0.0);
}

TEST_CASE("exponential bound") {
  const LaplacianBundle b = laplacian_bundle(Graph::ring(20));
  const ExponentialBound e = exponential_bound(contraction_reference_matrix(b, 0.52));
  CHECK(std::abs(e.eta - 1.0) <= 1e-10);
  CHECK(std::abs(e.gamma - 1.0) <= 1e-10);

  Eigen::Matrix2d A;
  A << 1, 1, 0, 2;
  const ExponentialBound g = exponential_bound(A);
  CHECK(g.eta == doctest::Approx(1.0));
  // Eigenvectors (1,0) and (1,1)/sqrt(2); condition number by hand.
  Eigen::Matrix2d V;
  V << 1, 1 / std::sqrt(2.0), 0, 1 / std::sqrt(2.0);
  const Eigen::Vector2d s2 = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(V.transpose() * V).eigenvalues();
  CHECK(g.gamma == doctest::Approx(std::sqrt(s2(1) / s2(0))).epsilon(1e-10));
}

TEST_CASE("condition checker") {
  const LaplacianBundle single = laplacian_bundle(Graph::from_edges(1, std::vector<Edge>{}));

  SUBCASE("collapse with L = 0") {
    const Gains g{0.7, 1.3, 0.0, 0.9, 0.0};
    const double l = 3.2;
    const ConditionReport r = check_condition(Variant::kSecondOrderPid, g, l, single);
    CHECK(r.sigma == std::sqrt(0.7 * l));
    CHECK(r.eta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.gamma_const == doctest::Approx(1.0).epsilon(1e-12));
    const ConditionReport c = check_condition(Variant::kCorollary, g, l, single);
    CHECK(c.sigma == r.sigma);
    CHECK(c.sigma1 == r.sigma1);
  }

  SUBCASE("Example-2 gains on ring(20)") {
    const LaplacianBundle b = laplacian_bundle(Graph::ring(20));
    const double l = random_quadratic_set(20, 7, 2).l_global();
    const ConditionReport r = check_condition(Variant::kSecondOrderPid, kExample2, l, b);
    const double c = std::sqrt((1 + 0.65 * 0.65 + 2 * 0.52 * 0.52) * 16.0);
    CHECK(r.lambda_max_LtL == doctest::Approx(16.0));
    CHECK(r.sigma == doctest::Approx(std::sqrt(0.14 * l + 0.156 * 0.156 + 0.52 * 0.52 + c)).epsilon(1e-12));
    CHECK(r.sigma1 == doctest::Approx(0.14 * l + 1 + 0.156 * 0.156 + 0.52 * 0.52 + c).epsilon(1e-12));
    CHECK(r.satisfied == (r.sigma < r.eta / r.gamma_const));
    const std::string kv = to_key_value(r);
    CHECK(kv.find("sigma = ") != std::string::npos);
    CHECK(kv.find("sigma1 = ") != std::string::npos);
    CHECK(kv.find("sigma_below_sigma1_minus_1 = ") != std::string::npos);
  }

  SUBCASE("large gains break the condition") {
    const LaplacianBundle b = laplacian_bundle(Graph::ring(20));
    Gains big = kExample2;
    for (double* c : {&big.c1, &big.c2, &big.c3, &big.c4, &big.c5}) *c *= 1000;
    const ConditionReport r = check_condition(Variant::kSecondOrderPid, big, 36.0, b);
    CHECK_FALSE(r.satisfied);
    CHECK(r.predicted_rate < 0.0);
  }

  SUBCASE("Zhu2022 ignores c5") {
    const LaplacianBundle b = laplacian_bundle(Graph::ring(5));
    Gains g = kExample2;
    g.c5 = 0.0;
    CHECK(check_condition(Variant::kZhu2022, kExample2, 4.0, b).sigma ==
          check_condition(Variant::kCorollary, g, 4.0, b).sigma);
  }

  SUBCASE("first-order is rejected") {
    CHECK(code_of([&] { check_condition(Variant::kFirstOrderPid, kExample1, 1.0, single); }) ==
          ErrorCode::kInvalidConfig);
  }
}
