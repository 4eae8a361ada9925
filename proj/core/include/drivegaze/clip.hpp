#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "drivegaze/tensor.hpp"
#include "drivegaze/tensor_io.hpp"

namespace drivegaze {

using Rng = std::mt19937_64;

enum class Landscape : std::uint8_t { Downtown = 0, Countryside = 1, Highway = 2 };
inline constexpr std::size_t kLandscapeCount = 3;

std::string_view to_string(Landscape landscape);
Landscape parse_landscape(std::string_view name);

/// Segmentation categories, in label-id order.
enum class Category : std::uint8_t {
  Road = 0,
  Sidewalk,
  Buildings,
  TrafficSigns,
  Trees,
  RoadLimits,
  Sky,
  People,
  Vehicles,
  Cycles,
};
inline constexpr std::size_t kCategoryCount = 10;
std::string_view category_name(std::size_t id);

struct FrameRecord {
  std::size_t frame_index = 0;
  double speed_kmh = 0.0;
  Landscape landscape = Landscape::Downtown;
  std::string frame_path;
  std::string map_path;
  std::string seg_path;
};

/// One driving sequence held in memory. frames[i] is 3 x H x W RGB in
/// [0, 1]; maps[i] is 1 x H x W, max-normalised to [0, 1]. segmentation is
/// either empty or one label map per frame.
struct Sequence {
  std::string id;
  std::vector<Tensor> frames;
  std::vector<Tensor> maps;
  std::vector<LabelMap> segmentation;
  std::vector<FrameRecord> records;

  std::size_t length() const { return frames.size(); }
  std::size_t height() const { return frames.empty() ? 0 : frames.front().dim(1); }
  std::size_t width() const { return frames.empty() ? 0 : frames.front().dim(2); }
  bool has_segmentation() const { return !segmentation.empty(); }
};

struct VideoClip {
  Tensor frames;  // 3 x 16 x H x W
  std::string sequence_id;
  std::size_t end_index = 0;
};

/// Frames end_index - 15 .. end_index. Throws std::out_of_range when the
/// window leaves the sequence.
VideoClip make_clip(const Sequence& sequence, std::size_t end_index);

/// Last frame of a clip as 3 x H x W.
Tensor last_frame(const VideoClip& clip);

enum class CropPolicy { Mild, Aggressive };
std::string_view to_string(CropPolicy policy);
CropPolicy parse_crop_policy(std::string_view name);

/// Square extent a clip is resized to before cropping: 128/112 (mild) or
/// 256/112 (aggressive) of the network input size.
std::size_t crop_resize_extent(CropPolicy policy, std::size_t input_size);

struct SampleGeometry {
  std::size_t input_size = 112;         // S
  std::size_t refine_resolution = 448;  // R
};

struct CropSample {
  Tensor cropped_clip;  // 3 x 16 x S x S
  Tensor cropped_map;   // 1 x S x S
  Tensor resized_clip;  // 3 x 16 x S x S
  Tensor full_map;      // 1 x R x R
  Tensor last_frame;    // 3 x R x R
  std::size_t origin_y = 0;
  std::size_t origin_x = 0;
  std::size_t source_extent = 0;  // side of the resized source the window was cut from
};

CropSample crop_policy_mild(const VideoClip& clip, const Tensor& map, Rng& rng, const SampleGeometry& geometry);
CropSample crop_policy_aggressive(const VideoClip& clip, const Tensor& map, Rng& rng,
                                  const SampleGeometry& geometry);
CropSample make_crop_sample(CropPolicy policy, const VideoClip& clip, const Tensor& map, Rng& rng,
                            const SampleGeometry& geometry);

/// Resized stream and last frame only, as used at test time.
struct InferenceInput {
  Tensor resized_clip;  // 3 x 16 x S x S
  Tensor last_frame;    // 3 x R x R
};
InferenceInput make_inference_input(const VideoClip& clip, const SampleGeometry& geometry);

struct MirrorResult {
  VideoClip clip;
  Tensor map;
  bool flipped = false;
};

/// With probability 0.5 flips clip and map horizontally together.
MirrorResult mirror(VideoClip clip, Tensor map, Rng& rng);

struct FrameRange {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

struct ClipRef {
  std::size_t sequence = 0;  // index into the sequence list
  std::size_t end_index = 0;
  friend bool operator==(const ClipRef&, const ClipRef&) = default;
};

struct SplitConfig {
  std::vector<std::string> test_sequences;  // ids; every other sequence trains
  std::size_t validation_frames = 500;
};

struct DatasetSplit {
  std::vector<ClipRef> train;
  std::vector<ClipRef> validation;
  std::vector<ClipRef> test;
  std::vector<FrameRange> validation_frames;  // per sequence; empty range for test sequences
  std::vector<std::string> warnings;
};

/// Central validation window of a training sequence of length L:
/// [L/2 - 250, L/2 + 250) for the default 500 frames. Sequences shorter
/// than validation_frames + 16 fall back to the central third; `shrunk`
/// reports the fallback.
FrameRange validation_window(std::size_t length, std::size_t validation_frames, bool* shrunk = nullptr);

DatasetSplit split(const std::vector<Sequence>& sequences, const SplitConfig& config);

}  // namespace drivegaze
