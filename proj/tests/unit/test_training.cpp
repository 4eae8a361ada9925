#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "drivegaze/checkpoint.hpp"
#include "drivegaze/synth.hpp"
#include "drivegaze/training.hpp"
#include "test_support.hpp"

namespace drivegaze {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

const std::vector<Sequence>& tiny_sequences() {
  static const std::vector<Sequence> seqs = [] {
    SynthConfig c;
    c.sequences = 2;
    c.frames = 60;
    std::vector<Sequence> out;
    for (auto& s : synth_generate(c, 11)) out.push_back(std::move(s.sequence));
    return out;
  }();
  return seqs;
}

std::vector<ClipRef> all_clips() {
  std::vector<ClipRef> clips;
  for (std::size_t s = 0; s < tiny_sequences().size(); ++s)
    for (std::size_t e = 15; e < tiny_sequences()[s].length(); ++e) clips.push_back({s, e});
  return clips;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("drivegaze_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(Training, StepReducesLossOnItsBatch) {
  const NetConfig cfg = NetConfig::tiny();
  int decreased = 0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    ModelParams params = init_params(cfg, 100 + trial);
    Optimizer opt(params, AdamConfig{1e-4});
    SampleStream stream(tiny_sequences(), all_clips(), CropPolicy::Aggressive, geometry_of(cfg), trial);
    const auto batch = stream.next_batch(1);
    const StepLosses before = train_step(batch, params, opt);
    const StepLosses after = batch_losses(batch, params);
    decreased += after.total() <= before.total();
  }
  EXPECT_GE(decreased, 18);
}

TEST(Training, PerfectPredictionHasZeroLoss) {
  const NetConfig cfg = NetConfig::tiny();
  const ModelParams params = init_params(cfg, 3);
  SampleStream stream(tiny_sequences(), all_clips(), CropPolicy::Mild, geometry_of(cfg), 4);
  CropSample s = stream.next();
  {
    NoGradGuard guard;
    const auto out = coarse_fine_forward(Var::constant(s.cropped_clip), Var::constant(s.resized_clip),
                                         Var::constant(s.last_frame), params);
    s.cropped_map = out.cropped_map.value();
    s.full_map = out.refined_map.value();
  }
  const std::vector<CropSample> batch{s};
  const StepLosses l = batch_losses(batch, params);
  EXPECT_EQ(l.loss1, 0.0);
  EXPECT_EQ(l.loss2, 0.0);
}

TEST(Training, CoarseHasSingleLoss) {
  const NetConfig cfg = NetConfig::tiny(Architecture::Coarse);
  ModelParams params = init_params(cfg, 5);
  Optimizer opt(params);
  SampleStream stream(tiny_sequences(), all_clips(), CropPolicy::Mild, geometry_of(cfg), 6);
  const auto batch = stream.next_batch(2);
  const StepLosses l = train_step(batch, params, opt);
  EXPECT_EQ(l.loss2, 0.0);
  EXPECT_GT(l.loss1, 0.0);
  EXPECT_EQ(opt.step_count(), 1u);
}

TEST(Training, SampleStreamDeterministic) {
  const NetConfig cfg = NetConfig::tiny();
  SampleStream a(tiny_sequences(), all_clips(), CropPolicy::Aggressive, geometry_of(cfg), 9);
  SampleStream b(tiny_sequences(), all_clips(), CropPolicy::Aggressive, geometry_of(cfg), 9);
  for (int i = 0; i < 3; ++i) {
    const CropSample x = a.next(), y = b.next();
    EXPECT_EQ(x.cropped_clip, y.cropped_clip);
    EXPECT_EQ(x.full_map, y.full_map);
    EXPECT_EQ(x.origin_x, y.origin_x);
  }
}

TEST(Training, TrainLoopLogsAndIsReproducible) {
  const NetConfig cfg = NetConfig::tiny(Architecture::Coarse);
  DatasetSplit sp = split(tiny_sequences(), SplitConfig{{}, 20});
  TrainOptions o;
  o.steps = 4;
  o.batch_size = 1;
  o.seed = 12;
  o.log_interval = 2;
  o.validation_stride = 10;
  o.policy = CropPolicy::Mild;
  ModelParams p1 = init_params(cfg, 1), p2 = init_params(cfg, 1);
  Optimizer o1(p1), o2(p2);
  const auto rows1 = train_loop(p1, o1, tiny_sequences(), sp, o);
  const auto rows2 = train_loop(p2, o2, tiny_sequences(), sp, o);
  ASSERT_EQ(rows1.size(), 2u);
  EXPECT_EQ(rows1[1].step, 4u);
  EXPECT_EQ(rows1[0].loss1, rows2[0].loss1);
  EXPECT_EQ(rows1[1].validation_cc, rows2[1].validation_cc);
  for (std::size_t i = 0; i < p1.entries().size(); ++i)
    EXPECT_EQ(p1.entries()[i].tensor.value(), p2.entries()[i].tensor.value());
}

TEST(Predict, DeterministicShapes) {
  const VideoClip clip = make_clip(tiny_sequences()[0], 20);
  const ModelParams cf = init_params(NetConfig::tiny(), 2);
  const Tensor a = predict(clip, cf);
  EXPECT_EQ(a.shape(), (Shape{1, 128, 128}));
  EXPECT_EQ(a, predict(clip, cf));
  const ModelParams c = init_params(NetConfig::tiny(Architecture::Coarse), 2);
  EXPECT_EQ(predict(clip, c).shape(), (Shape{1, 64, 64}));
}

TEST(Predict, ZeroRefineWeightsGiveConstantMap) {
  ModelParams p = init_params(NetConfig::tiny(), 2);
  for (auto& e : p.entries()) {
    if (e.name == "fine.conv4.w") e.tensor.mutable_value() = Tensor(e.tensor.shape());
    if (e.name == "fine.conv4.b") e.tensor.mutable_value() = Tensor(e.tensor.shape(), 0.3);
  }
  const Tensor m = predict(make_clip(tiny_sequences()[1], 30), p);
  EXPECT_EQ(m, Tensor(m.shape(), 0.3));
}

TEST(Checkpoint, RoundTripWithOptimizer) {
  const fs::path dir = scratch("ckpt");
  const NetConfig cfg = NetConfig::tiny();
  ModelParams params = init_params(cfg, 21);
  Optimizer opt(params);
  SampleStream stream(tiny_sequences(), all_clips(), CropPolicy::Aggressive, geometry_of(cfg), 1);
  train_step(stream.next_batch(1), params, opt);
  train_step(stream.next_batch(1), params, opt);
  save_checkpoint(dir / "m.ckpt", params, &opt);

  const Checkpoint loaded = load_checkpoint(dir / "m.ckpt", cfg);
  EXPECT_EQ(loaded.params.config(), cfg);
  ASSERT_TRUE(loaded.optimizer.has_value());
  EXPECT_EQ(loaded.optimizer->step_count(), 2u);
  ASSERT_EQ(loaded.params.entries().size(), params.entries().size());
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    const Tensor& a = params.entries()[i].tensor.value();
    const Tensor& b = loaded.params.entries()[i].tensor.value();
    EXPECT_EQ(loaded.params.entries()[i].name, params.entries()[i].name);
    for (std::size_t k = 0; k < a.numel(); ++k) ASSERT_EQ(b[k], double(float(a[k])));
    EXPECT_EQ(loaded.optimizer->states()[i].m, opt.states()[i].m);
    EXPECT_EQ(loaded.optimizer->states()[i].v, opt.states()[i].v);
  }

  // Resuming continues the step counter.
  ModelParams resumed = loaded.params;
  Optimizer ropt = *loaded.optimizer;
  train_step(stream.next_batch(1), resumed, ropt);
  EXPECT_EQ(ropt.step_count(), 3u);

  save_checkpoint(dir / "plain.ckpt", params);
  EXPECT_FALSE(load_checkpoint(dir / "plain.ckpt").optimizer.has_value());
}

TEST(Checkpoint, RejectsMismatchAndCorruption) {
  const fs::path dir = scratch("ckpt_bad");
  const ModelParams coarse = init_params(NetConfig::tiny(Architecture::Coarse), 1);
  save_checkpoint(dir / "c.ckpt", coarse);
  EXPECT_THROW(load_checkpoint(dir / "c.ckpt", NetConfig::tiny()), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "c.ckpt", NetConfig::full(Architecture::Coarse)), FormatError);
  EXPECT_NO_THROW(load_checkpoint(dir / "c.ckpt", NetConfig::tiny(Architecture::Coarse)));

  std::ifstream in(dir / "c.ckpt", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{10}}) {
    std::ofstream(dir / "t.ckpt", std::ios::binary) << bytes.substr(0, cut);
    EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), FormatError) << cut;
  }
  std::ofstream(dir / "x.ckpt", std::ios::binary) << bytes << "junk";
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);
}

}  // namespace
}  // namespace drivegaze
