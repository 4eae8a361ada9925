#include "drivegaze/training.hpp"

#include <stdexcept>

#include "drivegaze/image.hpp"
#include "drivegaze/metrics.hpp"

namespace drivegaze {

Optimizer::Optimizer(const ModelParams& params, AdamConfig config) : config_(config) {
  states_.reserve(params.entries().size());
  for (const auto& e : params.entries()) states_.push_back(AdamState::zeros_like(e.tensor.value(), config));
}

void Optimizer::step(ModelParams& params) {
  auto& entries = params.entries();
  if (entries.size() != states_.size()) {
    throw std::invalid_argument("optimizer tracks " + std::to_string(states_.size()) + " tensors, model has " +
                                std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    adam_step(entries[i].tensor.mutable_value(), entries[i].tensor.grad(), states_[i]);
  }
}

SampleGeometry geometry_of(const NetConfig& config) { return {config.input_size, config.refine_resolution}; }

namespace {

struct SampleLoss {
  Var loss1;
  Var loss2;
};

SampleLoss sample_loss(const CropSample& s, const ModelParams& params) {
  if (params.arch() == Architecture::Coarse) {
    Var map = coarse_forward(Var::constant(s.cropped_clip), params);
    return {mse(map, Var::constant(s.cropped_map)), {}};
  }
  auto out = coarse_fine_forward(Var::constant(s.cropped_clip), Var::constant(s.resized_clip),
                                 Var::constant(s.last_frame), params);
  return {mse(out.cropped_map, Var::constant(s.cropped_map)), mse(out.refined_map, Var::constant(s.full_map))};
}

}  // namespace

StepLosses batch_losses(std::span<const CropSample> batch, const ModelParams& params) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  NoGradGuard guard;
  StepLosses sum;
  for (const auto& s : batch) {
    auto l = sample_loss(s, params);
    sum.loss1 += l.loss1.value().item();
    if (l.loss2.valid()) sum.loss2 += l.loss2.value().item();
  }
  const double n = static_cast<double>(batch.size());
  return {sum.loss1 / n, sum.loss2 / n};
}

StepLosses train_step(std::span<const CropSample> batch, ModelParams& params, Optimizer& optimizer) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const double weight = 1.0 / static_cast<double>(batch.size());
  params.zero_grad();
  StepLosses sum;
  for (const auto& s : batch) {
    auto l = sample_loss(s, params);
    sum.loss1 += l.loss1.value().item();
    Var total = l.loss1;
    if (l.loss2.valid()) {
      sum.loss2 += l.loss2.value().item();
      total = add(total, l.loss2);
    }
    backward(scale(total, weight));
  }
  optimizer.step(params);
  return {sum.loss1 * weight, sum.loss2 * weight};
}

SampleStream::SampleStream(const std::vector<Sequence>& sequences, std::vector<ClipRef> clips, CropPolicy policy,
                           SampleGeometry geometry, std::uint64_t seed)
    : sequences_(&sequences), clips_(std::move(clips)), policy_(policy), geometry_(geometry), rng_(seed) {
  if (clips_.empty()) throw std::invalid_argument("sample stream needs at least one training clip");
}

CropSample SampleStream::next() {
  std::uniform_int_distribution<std::size_t> pick(0, clips_.size() - 1);
  const ClipRef ref = clips_[pick(rng_)];
  const Sequence& seq = sequences_->at(ref.sequence);
  auto mirrored = mirror(make_clip(seq, ref.end_index), seq.maps.at(ref.end_index), rng_);
  return make_crop_sample(policy_, mirrored.clip, mirrored.map, rng_, geometry_);
}

std::vector<CropSample> SampleStream::next_batch(std::size_t batch_size) {
  std::vector<CropSample> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(next());
  return batch;
}

std::optional<double> mean_clip_cc(const ModelParams& params, const std::vector<Sequence>& sequences,
                                   std::span<const ClipRef> clips, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < clips.size(); i += stride) {
    const Sequence& seq = sequences.at(clips[i].sequence);
    const Tensor& gt = seq.maps.at(clips[i].end_index);
    Tensor pred = predict(make_clip(seq, clips[i].end_index), params);
    if (pred.shape() != gt.shape()) pred = image::resize_bilinear(pred, gt.dim(1), gt.dim(2));
    if (auto c = metrics::cc(pred, gt)) {
      sum += *c;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<LogRow> train_loop(ModelParams& params, Optimizer& optimizer, const std::vector<Sequence>& sequences,
                               const DatasetSplit& split, const TrainOptions& options,
                               const std::function<void(const LogRow&)>& on_log) {
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (options.log_interval == 0) throw std::invalid_argument("log interval must be positive");
  const std::uint64_t start = optimizer.step_count();
  std::seed_seq seed{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                     static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(start >> 32)};
  std::uint64_t stream_seed = 0;
  {
    std::array<std::uint32_t, 2> words{};
    seed.generate(words.begin(), words.end());
    stream_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  }
  SampleStream stream(sequences, split.train, options.policy, geometry_of(params.config()), stream_seed);

  std::vector<LogRow> log;
  StepLosses window;
  std::size_t in_window = 0;
  for (std::size_t s = 0; s < options.steps; ++s) {
    const auto batch = stream.next_batch(options.batch_size);
    const StepLosses l = train_step(batch, params, optimizer);
    window.loss1 += l.loss1;
    window.loss2 += l.loss2;
    ++in_window;
    if ((s + 1) % options.log_interval == 0) {
      LogRow row;
      row.step = optimizer.step_count();
      row.loss1 = window.loss1 / static_cast<double>(in_window);
      row.loss2 = window.loss2 / static_cast<double>(in_window);
      if (options.validation_stride > 0 && !split.validation.empty()) {
        row.validation_cc = mean_clip_cc(params, sequences, split.validation, options.validation_stride);
      }
      if (on_log) on_log(row);
      log.push_back(row);
      window = {};
      in_window = 0;
    }
  }
  return log;
}

Tensor predict(const VideoClip& clip, const ModelParams& params) {
  if (clip.frames.rank() != 4 || clip.frames.dim(1) != kClipFrames || clip.frames.dim(0) != 3) {
    throw ShapeError("predict expects a 3 x 16 x H x W clip, got " + shape_str(clip.frames.shape()));
  }
  NoGradGuard guard;
  auto input = make_inference_input(clip, geometry_of(params.config()));
  Var coarse = coarse_forward(Var::constant(std::move(input.resized_clip)), params);
  if (params.arch() == Architecture::Coarse) return coarse.value();
  return refine(coarse, Var::constant(std::move(input.last_frame)), params).map.value();
}

}  // namespace drivegaze
