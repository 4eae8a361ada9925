#include <benchmark/benchmark.h>

#include <random>

#include "drivegaze/ops.hpp"

namespace {

using drivegaze::Shape;
using drivegaze::Tensor;

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

// Args: c_in, c_out, frames, side
void BM_Conv3dForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto ci = static_cast<std::size_t>(state.range(0));
  const auto co = static_cast<std::size_t>(state.range(1));
  const auto t = static_cast<std::size_t>(state.range(2));
  const auto s = static_cast<std::size_t>(state.range(3));
  const Tensor x = random_tensor({ci, t, s, s}, rng);
  const Tensor w = random_tensor({co, ci, 3, 3, 3}, rng);
  const Tensor b = random_tensor({co}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(drivegaze::ops::conv3d(x, w, b));
  state.counters["MAC/s"] = benchmark::Counter(static_cast<double>(co * ci * 27 * t * s * s),
                                               benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_Conv3dForward)->Args({3, 8, 16, 64})->Args({16, 32, 8, 16})->Args({64, 64, 4, 8})
    ->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto ci = static_cast<std::size_t>(state.range(0));
  const auto co = static_cast<std::size_t>(state.range(1));
  const auto t = static_cast<std::size_t>(state.range(2));
  const auto s = static_cast<std::size_t>(state.range(3));
  const Tensor x = random_tensor({ci, t, s, s}, rng);
  const Tensor w = random_tensor({co, ci, 3, 3, 3}, rng);
  const Tensor g = random_tensor({co, t, s, s}, rng);
  const bool input_grad = state.range(4) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(drivegaze::ops::conv3d_backward(x, w, g, input_grad));
}
BENCHMARK(BM_Conv3dBackward)->Args({3, 8, 16, 64, 0})->Args({3, 8, 16, 64, 1})->Args({16, 32, 8, 16, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Conv2dForward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_tensor({c, s, s}, rng);
  const Tensor w = random_tensor({c, c, 3, 3}, rng);
  const Tensor b = random_tensor({c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(drivegaze::ops::conv2d(x, w, b));
}
BENCHMARK(BM_Conv2dForward)->Args({4, 128})->Args({8, 128})->Unit(benchmark::kMillisecond);

void BM_MaxPool3d(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({16, 16, 32, 32}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(drivegaze::ops::max_pool3d(x, {2, 2, 2}));
}
BENCHMARK(BM_MaxPool3d)->Unit(benchmark::kMicrosecond);

}  // namespace
