// Serial reference vs OpenMP path for the parallel kernels.
#include <benchmark/benchmark.h>

#include "edgepipe/common/rng.hpp"
#include "edgepipe/ml/iforest.hpp"
#include "edgepipe/ml/kmeans.hpp"
#include "edgepipe/ml/smote.hpp"

using namespace edgepipe;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) m(r, c) = g(rng);
  }
  return m;
}

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "omp" : "serial"); }

void BM_IForestFit(benchmark::State& state) {
  const auto x = gaussian(20000, 17, 1);
  const std::vector<std::string> schema(17, "f");
  for (auto _ : state) benchmark::DoNotOptimize(iforest_fit(x, schema, {}, exec_of(state)));
  label(state);
}

void BM_IForestScore(benchmark::State& state) {
  const auto x = gaussian(20000, 17, 2);
  const auto model = iforest_fit(x, std::vector<std::string>(17, "f"), {}).model;
  for (auto _ : state) benchmark::DoNotOptimize(iforest_scores(model, x, exec_of(state)));
  label(state);
}

void BM_KMeansAssign(benchmark::State& state) {
  const auto x = gaussian(50000, 17, 3);
  const auto c = gaussian(4, 17, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_assign(c, x, exec_of(state)));
  label(state);
}

void BM_KMeansFit(benchmark::State& state) {
  const auto x = gaussian(5000, 17, 5);
  KMeansParams p;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_fit(x, p, exec_of(state)));
  label(state);
}

void BM_SmoteKnn(benchmark::State& state) {
  const auto x = gaussian(3000, 11, 6);
  for (auto _ : state) benchmark::DoNotOptimize(knn_indices(x, 5, exec_of(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_IForestFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IForestScore)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KMeansAssign)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KMeansFit)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SmoteKnn)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
