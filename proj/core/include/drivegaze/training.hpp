#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "drivegaze/adam.hpp"
#include "drivegaze/clip.hpp"
#include "drivegaze/net.hpp"

namespace drivegaze {

/// One AdamState per parameter tensor, aligned with ModelParams::entries().
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const ModelParams& params, AdamConfig config = {});

  /// Applies one update to every parameter from its accumulated gradient.
  void step(ModelParams& params);

  std::uint64_t step_count() const { return states_.empty() ? 0 : states_.front().step; }
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<AdamState> states_;
};

struct StepLosses {
  double loss1 = 0.0;  // cropped stream (COARSE only: the sole loss)
  double loss2 = 0.0;  // refined full-frame map; 0 for COARSE
  double total() const { return loss1 + loss2; }
};

SampleGeometry geometry_of(const NetConfig& config);

/// Mean (loss1, loss2) over the batch without updating anything.
StepLosses batch_losses(std::span<const CropSample> batch, const ModelParams& params);

/// Forward + backward over the batch (losses averaged over items), then a
/// single Adam update. Returns the pre-update batch losses.
StepLosses train_step(std::span<const CropSample> batch, ModelParams& params, Optimizer& optimizer);

/// Draws training samples: uniform clip choice over `clips`, random mirror,
/// then the crop policy. The stream is a pure function of the seed.
class SampleStream {
 public:
  SampleStream(const std::vector<Sequence>& sequences, std::vector<ClipRef> clips, CropPolicy policy,
               SampleGeometry geometry, std::uint64_t seed);

  CropSample next();
  std::vector<CropSample> next_batch(std::size_t batch_size);

 private:
  const std::vector<Sequence>* sequences_;
  std::vector<ClipRef> clips_;
  CropPolicy policy_;
  SampleGeometry geometry_;
  Rng rng_;
};

/// Mean CC of predict() against the ground truth of every `stride`-th clip,
/// predictions resampled to the map extent. Undefined per-clip values are
/// skipped; nullopt when none is defined.
std::optional<double> mean_clip_cc(const ModelParams& params, const std::vector<Sequence>& sequences,
                                   std::span<const ClipRef> clips, std::size_t stride = 1);

struct TrainOptions {
  CropPolicy policy = CropPolicy::Aggressive;
  std::size_t steps = 500;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  std::size_t log_interval = 50;
  std::size_t validation_stride = 8;  // 0 disables validation CC in the log
};

struct LogRow {
  std::uint64_t step = 0;  // optimizer step count after the update
  double loss1 = 0.0;      // mean over the steps since the previous row
  double loss2 = 0.0;
  std::optional<double> validation_cc;
};

/// Runs `options.steps` updates from the optimizer's current step count.
/// The sample stream is seeded from (seed, starting step) so a resumed run
/// does not replay the samples of the first leg.
std::vector<LogRow> train_loop(ModelParams& params, Optimizer& optimizer, const std::vector<Sequence>& sequences,
                               const DatasetSplit& split, const TrainOptions& options,
                               const std::function<void(const LogRow&)>& on_log = {});

/// Test-time prediction: the resized stream only. COARSE+FINE returns the
/// refined 1 x R x R map, COARSE the 1 x S x S coarse map.
Tensor predict(const VideoClip& clip, const ModelParams& params);

}  // namespace drivegaze
