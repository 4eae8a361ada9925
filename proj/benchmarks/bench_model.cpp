#include <benchmark/benchmark.h>

#include <vector>

#include "drivegaze/synth.hpp"
#include "drivegaze/training.hpp"

namespace {

using namespace drivegaze;

void BM_TinyCoarseForward(benchmark::State& state) {
  const NetConfig config = NetConfig::tiny(Architecture::Coarse);
  const ModelParams params = init_params(config, 1);
  const Var clip = Var::constant(Tensor({3, kClipFrames, config.input_size, config.input_size}, 0.5));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(coarse_forward(clip, params));
}
BENCHMARK(BM_TinyCoarseForward)->Unit(benchmark::kMillisecond);

void BM_TinyTrainStep(benchmark::State& state) {
  SynthConfig synth;
  synth.frames = 64;
  synth.sequences = 1;
  std::vector<Sequence> sequences;
  for (auto& s : synth_generate(synth, 7)) sequences.push_back(s.sequence);
  std::vector<ClipRef> clips;
  for (std::size_t end = kClipFrames - 1; end < synth.frames; ++end) clips.push_back({0, end});

  const NetConfig config = NetConfig::tiny();
  ModelParams params = init_params(config, 1);
  Optimizer optimizer(params);
  SampleStream stream(sequences, clips, CropPolicy::Aggressive, geometry_of(config), 1);
  const auto batch_size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    state.PauseTiming();
    const auto batch = stream.next_batch(batch_size);
    state.ResumeTiming();
    benchmark::DoNotOptimize(train_step(batch, params, optimizer));
  }
}
BENCHMARK(BM_TinyTrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
