// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <random>

#include "csam/gp.hpp"
#include "csam/planner.hpp"
#include "csam/point_cloud.hpp"
#include "csam/sim_env.hpp"

using namespace csam;

namespace {

PointCloud cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back(Point(u(rng), u(rng), u(rng)));
  return c;
}

void BM_ChamferBruteForce(benchmark::State& state) {
  const auto a = cloud(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = cloud(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_brute_force(a, b));
}
BENCHMARK(BM_ChamferBruteForce)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_ChamferKdTree(benchmark::State& state) {
  const auto a = cloud(static_cast<std::size_t>(state.range(0)), 1);
  const auto b = cloud(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer(a, b));
}
BENCHMARK(BM_ChamferKdTree)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

Eigen::MatrixXd inputs(int n) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::MatrixXd X(n, 6);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 6; ++j) X(i, j) = u(rng);
  return X;
}

const GpHyperparams kHyp{{1.0, 0.8, 1.2, 0.9, 1.1, 1.0}, 2.0, 0.1};

void BM_GramSerial(benchmark::State& state) {
  const auto X = inputs(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix_serial(X, kHyp));
}
BENCHMARK(BM_GramSerial)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

void BM_GramParallel(benchmark::State& state) {
  const auto X = inputs(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix(X, kHyp));
}
BENCHMARK(BM_GramParallel)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

struct PlanFixture {
  ObjectClouds object = make_object(ObjectSpec{}, 1);
  GroundTruthDeviationModel model{GtDeviationParams{}};
  PlannerConfig cfg;
  double e0 = chamfer(object.initial, object.target);
  PlanFixture() { cfg.n_samples = 100; }
};

void BM_PlanSerial(benchmark::State& state) {
  const PlanFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(plan_serial(f.object.initial, f.object.target, &f.model, f.cfg, f.e0, f.e0));
}
BENCHMARK(BM_PlanSerial)->Unit(benchmark::kMillisecond);

void BM_PlanParallel(benchmark::State& state) {
  const PlanFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(plan(f.object.initial, f.object.target, &f.model, f.cfg, f.e0, f.e0));
}
BENCHMARK(BM_PlanParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
