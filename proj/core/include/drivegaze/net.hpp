#pragma once

// COARSE encoder-decoder and the COARSE+FINE two-stream model.
//
// Encoder (per 3D block: conv3d 3x3x3 + ReLU, then max pooling):
//   3 x 16 x S x S
//   -> conv 64,  pool (1,2,2) ->  64 x 16 x S/2  x S/2
//   -> conv 128, pool (2,2,2) -> 128 x  8 x S/4  x S/4
//   -> conv 256 x2, pool (2,2,2) -> 256 x 4 x S/8 x S/8
//   -> conv 512 x2, pool (2,2,2) -> 512 x 2 x S/16 x S/16
//   -> pool (2,1,1)           -> 512 x  1 x S/16 x S/16
// Decoder: four [conv2d + leaky ReLU + x2 upsample] stages, 256/128/64/32
// channels, then conv2d to one channel with ReLU -> 1 x S x S.
// Refinement: the resized-stream map upsampled to R x R, stacked with the
// last RGB frame (4 channels) and passed through conv2d 32/16/8/1.
//
// The full model uses S = 112 and R = 448. The tiny configuration divides
// every channel count by 8 and uses S = 64, R = 128.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drivegaze/autograd.hpp"
#include "drivegaze/tensor.hpp"

namespace drivegaze {

enum class Architecture { Coarse, CoarseFine };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& tag);

inline constexpr std::size_t kClipFrames = 16;
inline constexpr double kLeakyAlpha = 0.001;

struct NetConfig {
  Architecture arch = Architecture::CoarseFine;
  std::size_t input_size = 112;
  std::size_t channel_divisor = 1;
  std::size_t refine_resolution = 448;

  static NetConfig full(Architecture arch = Architecture::CoarseFine);
  static NetConfig tiny(Architecture arch = Architecture::CoarseFine);

  /// Throws std::invalid_argument unless S is a positive multiple of 16 and
  /// R equals S times a power of two.
  void validate() const;

  std::size_t bottleneck_size() const { return input_size / 16; }
  std::size_t refine_upsamplings() const;
  std::vector<std::size_t> encoder_channels() const;  // conv1a conv2a conv3a conv3b conv4a conv4b
  std::vector<std::size_t> decoder_channels() const;  // four stages
  std::vector<std::size_t> refine_channels() const;   // three hidden layers

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Named parameter tensors in schedule order. Copies share tensors.
class ModelParams {
 public:
  struct Entry {
    std::string name;
    Var tensor;
  };

  ModelParams() = default;
  explicit ModelParams(NetConfig config) : config_(config) {}

  const NetConfig& config() const { return config_; }
  Architecture arch() const { return config_.arch; }

  void add(std::string name, Var tensor);
  const Var& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  NetConfig config_;
  std::vector<Entry> entries_;
};

/// Expected (name, shape) list for a configuration; the source of truth for
/// initialisation and checkpoint validation.
std::vector<std::pair<std::string, Shape>> parameter_schedule(const NetConfig& config);

/// He-style uniform weights in [-sqrt(6 / fan_in), sqrt(6 / fan_in)], zero biases.
ModelParams init_params(const NetConfig& config, std::uint64_t seed);
double init_bound(std::size_t fan_in);

Var coarse_encode(const Var& clip, const ModelParams& params);
Var coarse_decode(const Var& bottleneck, const ModelParams& params);
Var coarse_forward(const Var& clip, const ModelParams& params);

/// Refinement head: upsample the coarse map to R x R, stack the last frame, convolve.
struct RefineOutput {
  Var input;  // 4 x R x R
  Var map;    // 1 x R x R
};
RefineOutput refine(const Var& coarse_map, const Var& last_frame, const ModelParams& params);

struct CoarseFineOutput {
  Var cropped_map;   // 1 x S x S, supervised by loss 1
  Var resized_map;   // 1 x S x S, coarse prediction of the resized stream
  Var refine_input;  // 4 x R x R
  Var refined_map;   // 1 x R x R, supervised by loss 2
};

CoarseFineOutput coarse_fine_forward(const Var& clip_cropped, const Var& clip_resized, const Var& last_frame,
                                     const ModelParams& params);

}  // namespace drivegaze
