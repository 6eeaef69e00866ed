#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"

using namespace pidflow;
using pidflow::test::code_of;

namespace {

void decay(const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Ref<Eigen::VectorXd> dy) { dy = -y; }

double decay_error(double h) {
  const Trajectory t = integrate(decay, Eigen::VectorXd::Ones(1), {h, 1.0, 1});
  return std::abs(t.states.back()(0) - std::exp(-1.0));
}

}  // namespace

TEST_CASE("single RK4 step") {
  const Eigen::VectorXd y = rk4_step(decay, Eigen::VectorXd::Ones(1), 0.1);
  const double h = 0.1;
  const double poly = 1 - h + h * h / 2 - h * h * h / 6 + h * h * h * h / 24;
  CHECK(std::abs(y(0) - 0.9048375) <= 1e-7);
  CHECK(std::abs(y(0) - poly) < 1e-15);

  const auto zero = [](const Eigen::Ref<const Eigen::VectorXd>&, Eigen::Ref<Eigen::VectorXd> dy) {
    dy.setZero();
  };
  const Eigen::VectorXd s = Eigen::Vector3d(1, -2, 3);
  CHECK(rk4_step(zero, s, 0.5) == s);
}

TEST_CASE("fourth-order global error") {
  for (double h : {0.1, 0.05, 0.02}) {
    const double ratio = decay_error(h) / decay_error(h / 2);
    CHECK(ratio >= 16 * 0.8);
    CHECK(ratio <= 16 * 1.2);
  }
}

TEST_CASE("recording") {
  SUBCASE("t_end = h with stride 1") {
    const Trajectory t = integrate(decay, Eigen::VectorXd::Ones(1), {0.1, 0.1, 1});
    CHECK(t.size() == 2);
    CHECK(t.times.back() == 0.1);
  }
  SUBCASE("stride and final state") {
    const Trajectory t = integrate(decay, Eigen::VectorXd::Ones(1), {0.01, 1.0, 10});
    CHECK(t.size() == 11);
    CHECK(t.times[5] == doctest::Approx(0.5));
    CHECK(t.times.back() == 1.0);
  }
  SUBCASE("shorter last step lands on t_end") {
    const Trajectory t = integrate(decay, Eigen::VectorXd::Ones(1), {0.3, 1.0, 1});
    CHECK(t.times.back() == 1.0);
    CHECK(t.states.back()(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
  }
}

TEST_CASE("config validation") {
  CHECK(code_of([] { IntegratorConfig{0.0, 1.0, 1}.validate(); }) == ErrorCode::kInvalidConfig);
  CHECK(code_of([] { IntegratorConfig{0.1, -1.0, 1}.validate(); }) == ErrorCode::kInvalidConfig);
  CHECK(code_of([] { IntegratorConfig{0.1, 0.05, 1}.validate(); }) == ErrorCode::kInvalidConfig);
  CHECK(code_of([] { IntegratorConfig{0.1, 1.0, 0}.validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("non-finite stage is a divergence") {
  const auto bad = [](const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Ref<Eigen::VectorXd> dy) {
    dy = y;
    dy(1) = std::numeric_limits<double>::quiet_NaN();
  };
  try {
    rk4_step(bad, Eigen::Vector2d(1, 1), 0.1, 2.5);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.component() == 1);
    CHECK(e.time() == 2.5);
  }
}

TEST_CASE("huge step on the Example-2 setup diverges") {
  const auto bundle = test::bundle_ptr(Graph::ring(20));
  const auto set = test::set_ptr(random_quadratic_set(20, 7, 2));
  const Dynamics d(Variant::kSecondOrderPid, {0.14, 0.65, 0.156, 0.52, 0.52}, bundle, set);
  Rng rng = Rng::stream(2, 1);
  const SystemState s0 = d.init_state(rng.uniform_vector(140, -1, 1));
  const IntegratorConfig cfg{2.0, 400.0, 1};
  CHECK(stability_warning(d.gains(), set->l_global(), bundle->lambda_max_L, cfg.h).has_value());
  CHECK(code_of([&] { integrate(d, s0, cfg); }) == ErrorCode::kDivergence);

  const IntegrationResult r = integrate_until_divergence(d, s0, cfg);
  REQUIRE(r.divergence.has_value());
  CHECK(r.trajectory.size() >= 1);
  for (const auto& y : r.trajectory.states) CHECK(y.lpNorm<Eigen::Infinity>() <= kDivergenceThreshold);

  CHECK_FALSE(stability_warning(d.gains(), set->l_global(), bundle->lambda_max_L, 1e-3).has_value());
}

TEST_CASE("determinism and lambda-sum conservation") {
  const auto bundle = test::bundle_ptr(Graph::ring(5));
  const auto set = test::set_ptr(random_quadratic_set(5, 3, 6));
  for (Variant v : {Variant::kFirstOrderPid, Variant::kSecondOrderPid, Variant::kCorollary}) {
    const Gains g = v == Variant::kFirstOrderPid ? Gains{0.8, 2.9, 5, 5, 0} : Gains{0.14, 0.65, 0.156, 0.52, 0.52};
    const Dynamics d(v, g, bundle, set);
    Rng rng(31);
    const SystemState s0 = d.init_state(rng.uniform_vector(15, -1, 1));
    const IntegratorConfig cfg{1e-2, 5.0, 5};
    const Trajectory a = integrate(d, s0, cfg, 31);
    const Trajectory b = integrate(d, s0, cfg, 31);
    REQUIRE(a.size() == b.size());
    bool identical = true;
    for (std::size_t k = 0; k < a.size(); ++k) identical &= a.states[k] == b.states[k];
    CHECK(identical);
    CHECK(a.metadata.seed == std::optional<std::uint64_t>(31));
    CHECK(a.metadata.variant == v);

    double drift = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const SystemState s = a.state(k);
      drift = std::max(drift, s.lambda_sum().lpNorm<Eigen::Infinity>() /
                                  std::max(1.0, s.lambda().lpNorm<Eigen::Infinity>()));
    }
    CHECK(drift <= 1e-9);
  }
}
