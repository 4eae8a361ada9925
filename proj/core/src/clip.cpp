#include "drivegaze/clip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "drivegaze/image.hpp"
#include "drivegaze/net.hpp"
#include "drivegaze/ops.hpp"

namespace drivegaze {

namespace {
constexpr std::array<std::string_view, kLandscapeCount> kLandscapeNames{"downtown", "countryside", "highway"};
constexpr std::array<std::string_view, kCategoryCount> kCategoryNames{
    "road", "sidewalk", "buildings", "traffic_signs", "trees", "road_limits", "sky", "people", "vehicles", "cycles"};
}  // namespace

std::string_view to_string(Landscape landscape) { return kLandscapeNames.at(static_cast<std::size_t>(landscape)); }

Landscape parse_landscape(std::string_view name) {
  for (std::size_t i = 0; i < kLandscapeNames.size(); ++i) {
    if (kLandscapeNames[i] == name) return static_cast<Landscape>(i);
  }
  throw std::invalid_argument("unknown landscape '" + std::string(name) + "'");
}

std::string_view category_name(std::size_t id) { return kCategoryNames.at(id); }

VideoClip make_clip(const Sequence& sequence, std::size_t end_index) {
  if (end_index + 1 < kClipFrames || end_index >= sequence.length()) {
    throw std::out_of_range("clip end index " + std::to_string(end_index) + " invalid for sequence '" +
                            sequence.id + "' of length " + std::to_string(sequence.length()));
  }
  const std::size_t H = sequence.height();
  const std::size_t W = sequence.width();
  const std::size_t plane = H * W;
  Tensor frames({3, kClipFrames, H, W});
  for (std::size_t t = 0; t < kClipFrames; ++t) {
    const Tensor& f = sequence.frames[end_index + 1 - kClipFrames + t];
    if (f.shape() != Shape{3, H, W}) throw ShapeError("sequence '" + sequence.id + "' has inconsistent frame shapes");
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy_n(f.data().data() + c * plane, plane, frames.data().data() + (c * kClipFrames + t) * plane);
    }
  }
  return {std::move(frames), sequence.id, end_index};
}

Tensor last_frame(const VideoClip& clip) {
  const std::size_t T = clip.frames.dim(1), H = clip.frames.dim(2), W = clip.frames.dim(3);
  const std::size_t plane = H * W;
  Tensor out({3, H, W});
  for (std::size_t c = 0; c < 3; ++c) {
    std::copy_n(clip.frames.data().data() + (c * T + T - 1) * plane, plane, out.data().data() + c * plane);
  }
  return out;
}

std::string_view to_string(CropPolicy policy) { return policy == CropPolicy::Mild ? "mild" : "aggressive"; }

CropPolicy parse_crop_policy(std::string_view name) {
  if (name == "mild") return CropPolicy::Mild;
  if (name == "aggressive") return CropPolicy::Aggressive;
  throw std::invalid_argument("unknown crop policy '" + std::string(name) + "' (expected mild | aggressive)");
}

std::size_t crop_resize_extent(CropPolicy policy, std::size_t input_size) {
  const double ratio = policy == CropPolicy::Mild ? 128.0 / 112.0 : 256.0 / 112.0;
  return static_cast<std::size_t>(std::lround(ratio * static_cast<double>(input_size)));
}

InferenceInput make_inference_input(const VideoClip& clip, const SampleGeometry& geometry) {
  const std::size_t S = geometry.input_size;
  const std::size_t R = geometry.refine_resolution;
  return {image::resize_bilinear(clip.frames, S, S), image::resize_bilinear(last_frame(clip), R, R)};
}

namespace {

CropSample crop_with_extent(const VideoClip& clip, const Tensor& map, Rng& rng, const SampleGeometry& geometry,
                            std::size_t extent) {
  const std::size_t S = geometry.input_size;
  const std::size_t R = geometry.refine_resolution;
  require_rank(map, 3, "crop sample map");
  std::uniform_int_distribution<std::size_t> origin(0, extent - S);
  CropSample s;
  s.origin_y = origin(rng);
  s.origin_x = origin(rng);
  s.source_extent = extent;
  s.cropped_clip = image::crop(image::resize_bilinear(clip.frames, extent, extent), s.origin_y, s.origin_x, S, S);
  s.cropped_map = image::crop(image::resize_bilinear(map, extent, extent), s.origin_y, s.origin_x, S, S);
  auto inference = make_inference_input(clip, geometry);
  s.resized_clip = std::move(inference.resized_clip);
  s.last_frame = std::move(inference.last_frame);
  s.full_map = image::resize_bilinear(map, R, R);
  return s;
}

}  // namespace

CropSample crop_policy_mild(const VideoClip& clip, const Tensor& map, Rng& rng, const SampleGeometry& geometry) {
  return crop_with_extent(clip, map, rng, geometry, crop_resize_extent(CropPolicy::Mild, geometry.input_size));
}

CropSample crop_policy_aggressive(const VideoClip& clip, const Tensor& map, Rng& rng,
                                  const SampleGeometry& geometry) {
  return crop_with_extent(clip, map, rng, geometry, crop_resize_extent(CropPolicy::Aggressive, geometry.input_size));
}

CropSample make_crop_sample(CropPolicy policy, const VideoClip& clip, const Tensor& map, Rng& rng,
                            const SampleGeometry& geometry) {
  return policy == CropPolicy::Mild ? crop_policy_mild(clip, map, rng, geometry)
                                    : crop_policy_aggressive(clip, map, rng, geometry);
}

MirrorResult mirror(VideoClip clip, Tensor map, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  MirrorResult result{std::move(clip), std::move(map), coin(rng)};
  if (result.flipped) {
    result.clip.frames = ops::flip_horizontal(result.clip.frames);
    result.map = ops::flip_horizontal(result.map);
  }
  return result;
}

FrameRange validation_window(std::size_t length, std::size_t validation_frames, bool* shrunk) {
  const bool too_short = length < validation_frames + kClipFrames;
  if (shrunk) *shrunk = too_short;
  const std::size_t width = too_short ? length / 3 : validation_frames;
  const std::size_t begin = length / 2 - width / 2;
  return {begin, begin + width};
}

DatasetSplit split(const std::vector<Sequence>& sequences, const SplitConfig& config) {
  DatasetSplit result;
  for (const auto& id : config.test_sequences) {
    const bool known = std::any_of(sequences.begin(), sequences.end(), [&](const Sequence& s) { return s.id == id; });
    if (!known) throw std::invalid_argument("test sequence '" + id + "' not in dataset");
  }
  for (std::size_t si = 0; si < sequences.size(); ++si) {
    const Sequence& seq = sequences[si];
    const std::size_t L = seq.length();
    const bool is_test =
        std::find(config.test_sequences.begin(), config.test_sequences.end(), seq.id) != config.test_sequences.end();
    if (is_test) {
      result.validation_frames.push_back({0, 0});
      for (std::size_t e = kClipFrames - 1; e < L; ++e) result.test.push_back({si, e});
      continue;
    }
    bool shrunk = false;
    const FrameRange val = validation_window(L, config.validation_frames, &shrunk);
    if (shrunk) {
      result.warnings.push_back("sequence '" + seq.id + "' has only " + std::to_string(L) +
                                " frames; validation shrinks to the central third");
    }
    result.validation_frames.push_back(val);
    for (std::size_t e = kClipFrames - 1; e < L; ++e) {
      const std::size_t first = e + 1 - kClipFrames;
      if (first >= val.begin && e < val.end) {
        result.validation.push_back({si, e});
      } else if (e < val.begin || first >= val.end) {
        result.train.push_back({si, e});
      }
    }
  }
  return result;
}

}  // namespace drivegaze
