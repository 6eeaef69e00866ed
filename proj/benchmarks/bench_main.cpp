#include <benchmark/benchmark.h>

#include <memory>

#include "pidflow/pidflow.hpp"

using namespace pidflow;

namespace {

struct Problem {
  std::shared_ptr<const LaplacianBundle> bundle;
  std::shared_ptr<const ObjectiveSet> set;
};

Problem ring_problem(int N, int n) {
  return {std::make_shared<const LaplacianBundle>(laplacian_bundle(Graph::ring(N))),
          std::make_shared<const ObjectiveSet>(random_quadratic_set(N, n, 1))};
}

Gains gains_for(Variant v) {
  return v == Variant::kFirstOrderPid ? Gains{0.8, 2.9, 5, 5, 0} : Gains{0.14, 0.65, 0.156, 0.52, 0.52};
}

void BM_KronApply(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1));
  const Eigen::MatrixXd L = Graph::ring(N).laplacian();
  Rng rng(1);
  const Eigen::VectorXd x = rng.uniform_vector(static_cast<Eigen::Index>(N) * n, -1, 1);
  Eigen::VectorXd out(x.size());
  for (auto _ : state) {
    kron_apply_into(L, n, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_KronApply)->Args({4, 10})->Args({20, 7})->Args({100, 10});

void BM_VectorField(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const Problem p = ring_problem(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  const Dynamics d(variant, gains_for(variant), p.bundle, p.set);
  Rng rng(2);
  const Eigen::VectorXd y = rng.uniform_vector(d.packed_size(), -1, 1);
  Eigen::VectorXd dy(y.size());
  for (auto _ : state) {
    d.evaluate(y, dy);
    benchmark::DoNotOptimize(dy.data());
  }
  state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_VectorField)
    ->Args({static_cast<int>(Variant::kFirstOrderPid), 4, 10})
    ->Args({static_cast<int>(Variant::kSecondOrderPid), 20, 7})
    ->Args({static_cast<int>(Variant::kCorollary), 20, 7});

void BM_Rk4Step(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  const Problem p = ring_problem(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  const Dynamics d(variant, gains_for(variant), p.bundle, p.set);
  const VectorField field = as_vector_field(d);
  Rng rng(3);
  Eigen::VectorXd y = rng.uniform_vector(d.packed_size(), -1, 1);
  for (auto _ : state) {
    y = rk4_step(field, y, 1e-3);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_Rk4Step)
    ->Args({static_cast<int>(Variant::kFirstOrderPid), 4, 10})
    ->Args({static_cast<int>(Variant::kSecondOrderPid), 20, 7});

}  // namespace

BENCHMARK_MAIN();
