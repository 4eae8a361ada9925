#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "drivegaze/metrics.hpp"

namespace {

using drivegaze::Tensor;

Tensor random_map(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  Tensor t({h, w});
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

void BM_CcAndKl(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto side = static_cast<std::size_t>(state.range(0));
  const Tensor p = random_map(side, side, rng);
  const Tensor g = random_map(side, side, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(drivegaze::metrics::cc(p, g));
    benchmark::DoNotOptimize(drivegaze::metrics::kl(g, p));
  }
}
BENCHMARK(BM_CcAndKl)->Arg(128)->Arg(448);

void BM_KendallTau(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dist(0, 50);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = dist(rng);
    b[i] = dist(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(drivegaze::metrics::kendall_tau(a, b));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n));
}
BENCHMARK(BM_KendallTau)->RangeMultiplier(8)->Range(64, 32768)->Complexity(benchmark::oNLogN);

}  // namespace
