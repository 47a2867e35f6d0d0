#include <benchmark/benchmark.h>

#include <random>

#include <sgm/affinity.hpp>
#include <sgm/assignment.hpp>
#include <sgm/datagen.hpp>
#include <sgm/elastic_curves.hpp>
#include <sgm/sgmnet.hpp>

namespace sgm {
namespace {

SrvfCurve wavy_srvf(int samples, double phase) {
  Matrix points(4 * samples, 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(points.rows() - 1);
    points(i, 0) = t;
    points(i, 1) = 0.2 * std::sin(6.0 * t + phase) + 0.05 * std::sin(17.0 * t);
  }
  return srvf_transform(resample_by_arclength(points, samples));
}

void BM_ShapeDistance(benchmark::State& state) {
  const int samples = static_cast<int>(state.range(0));
  const SrvfCurve a = wavy_srvf(samples, 0.0);
  const SrvfCurve b = wavy_srvf(samples, 0.7);
  ElasticOptions options;
  options.refine_sweeps = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(shape_distance(a, b, options));
}
BENCHMARK(BM_ShapeDistance)->Args({64, 0})->Args({64, 4})->Args({128, 0})->Args({128, 4})->Unit(benchmark::kMillisecond);

void BM_AffinityBuild(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SyntheticPair pair = generate_pair(random_base_graph(n, 1), DistortionLevel::kMedium, 2);
  for (auto _ : state) benchmark::DoNotOptimize(make_problem(pair.first, pair.second).affinity);
}
BENCHMARK(BM_AffinityBuild)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix w(n, n);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unit(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(w, true));
}
BENCHMARK(BM_Hungarian)->Arg(10)->Arg(40)->Arg(160);

void BM_SgmForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const SyntheticPair pair = generate_pair(random_base_graph(n, 4), DistortionLevel::kMedium, 5);
  const AffinityPair aff = make_problem(pair.first, pair.second).affinity;
  const NetworkConfig config;
  const NetworkParams params = init_params(config, 6);
  const AssociationAdjacency assoc = build_association(aff);
  for (auto _ : state) {
    ad::Tape tape;
    const ParamVars vars = bind_params(tape, params, false);
    benchmark::DoNotOptimize(forward(tape, aff, assoc, vars, config).assignment.value());
  }
}
BENCHMARK(BM_SgmForward)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_BruteForceQap(benchmark::State& state) {
  const SyntheticPair pair = generate_pair(random_base_graph(static_cast<int>(state.range(0)), 7), DistortionLevel::kLow, 8);
  const AffinityPair aff = make_problem(pair.first, pair.second).affinity;
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_qap(aff));
}
BENCHMARK(BM_BruteForceQap)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace sgm

BENCHMARK_MAIN();
