#include "drivegaze/net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace drivegaze {

std::string to_string(Architecture arch) {
  return arch == Architecture::Coarse ? "coarse" : "coarse_fine";
}

Architecture parse_architecture(const std::string& tag) {
  if (tag == "coarse") return Architecture::Coarse;
  if (tag == "coarse_fine") return Architecture::CoarseFine;
  throw std::invalid_argument("unknown architecture tag '" + tag + "' (expected coarse | coarse_fine)");
}

NetConfig NetConfig::full(Architecture arch) { return {arch, 112, 1, 448}; }
NetConfig NetConfig::tiny(Architecture arch) { return {arch, 64, 8, 128}; }

void NetConfig::validate() const {
  if (input_size == 0 || input_size % 16 != 0) {
    throw std::invalid_argument("input size must be a positive multiple of 16, got " + std::to_string(input_size));
  }
  if (channel_divisor == 0 || 32 % channel_divisor != 0) {
    throw std::invalid_argument("channel divisor must divide 32, got " + std::to_string(channel_divisor));
  }
  refine_upsamplings();
}

std::size_t NetConfig::refine_upsamplings() const {
  std::size_t size = input_size;
  std::size_t steps = 0;
  while (size < refine_resolution) {
    size *= 2;
    ++steps;
  }
  if (size != refine_resolution) {
    throw std::invalid_argument("refinement resolution " + std::to_string(refine_resolution) +
                                " is not the input size " + std::to_string(input_size) +
                                " times a power of two");
  }
  return steps;
}

std::vector<std::size_t> NetConfig::encoder_channels() const {
  std::vector<std::size_t> c{64, 128, 256, 256, 512, 512};
  for (auto& v : c) v /= channel_divisor;
  return c;
}

std::vector<std::size_t> NetConfig::decoder_channels() const {
  std::vector<std::size_t> c{256, 128, 64, 32};
  for (auto& v : c) v /= channel_divisor;
  return c;
}

std::vector<std::size_t> NetConfig::refine_channels() const {
  std::vector<std::size_t> c{32, 16, 8};
  for (auto& v : c) v = std::max<std::size_t>(1, v / channel_divisor);
  return c;
}

void ModelParams::add(std::string name, Var tensor) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.push_back({std::move(name), std::move(tensor)});
}

const Var& ModelParams::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw std::out_of_range("no parameter named " + name);
}

bool ModelParams::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.value().numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

namespace {

const char* const kEncoderNames[] = {"enc.conv1a", "enc.conv2a", "enc.conv3a", "enc.conv3b", "enc.conv4a", "enc.conv4b"};
const char* const kDecoderNames[] = {"dec.conv1", "dec.conv2", "dec.conv3", "dec.conv4"};
const char* const kRefineNames[] = {"fine.conv1", "fine.conv2", "fine.conv3", "fine.conv4"};

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_schedule(const NetConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Shape>> s;
  auto conv = [&s](const std::string& name, Shape w, std::size_t out) {
    s.emplace_back(name + ".w", std::move(w));
    s.emplace_back(name + ".b", Shape{out});
  };

  const auto enc = config.encoder_channels();
  std::size_t in = 3;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    conv(kEncoderNames[i], {enc[i], in, 3, 3, 3}, enc[i]);
    in = enc[i];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t out = config.decoder_channels()[i];
    conv(kDecoderNames[i], {out, in, 3, 3}, out);
    in = out;
  }
  conv("dec.out", {1, in, 3, 3}, 1);

  if (config.arch == Architecture::CoarseFine) {
    auto hidden = config.refine_channels();
    hidden.push_back(1);
    in = 4;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      conv(kRefineNames[i], {hidden[i], in, 3, 3}, hidden[i]);
      in = hidden[i];
    }
  }
  return s;
}

double init_bound(std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

ModelParams init_params(const NetConfig& config, std::uint64_t seed) {
  ModelParams params(config);
  std::mt19937_64 rng(seed);
  for (auto& [name, shape] : parameter_schedule(config)) {
    Tensor t(shape);
    if (shape.size() > 1) {
      const std::size_t fan_in = t.numel() / shape[0];
      std::uniform_real_distribution<double> dist(-init_bound(fan_in), init_bound(fan_in));
      for (auto& v : t.data()) v = dist(rng);
    }
    params.add(name, Var::parameter(std::move(t)));
  }
  return params;
}

namespace {

Var conv3d_relu(const Var& x, const ModelParams& p, const std::string& name) {
  return relu(conv3d(x, p.at(name + ".w"), p.at(name + ".b")));
}

Var conv2d_named(const Var& x, const ModelParams& p, const std::string& name) {
  return conv2d(x, p.at(name + ".w"), p.at(name + ".b"));
}

void require_shape(const Var& v, const Shape& expected, const char* what) {
  if (v.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected " + shape_str(expected) + ", got " + shape_str(v.shape()));
  }
}

}  // namespace

Var coarse_encode(const Var& clip, const ModelParams& params) {
  const auto& cfg = params.config();
  const std::size_t S = cfg.input_size;
  require_shape(clip, {3, kClipFrames, S, S}, "coarse_encode");

  Var x = conv3d_relu(clip, params, "enc.conv1a");
  x = max_pool3d(x, {1, 2, 2});
  x = conv3d_relu(x, params, "enc.conv2a");
  x = max_pool3d(x, {2, 2, 2});
  x = conv3d_relu(x, params, "enc.conv3a");
  x = conv3d_relu(x, params, "enc.conv3b");
  x = max_pool3d(x, {2, 2, 2});
  x = conv3d_relu(x, params, "enc.conv4a");
  x = conv3d_relu(x, params, "enc.conv4b");
  x = max_pool3d(x, {2, 2, 2});
  return max_pool3d(x, {2, 1, 1});
}

Var coarse_decode(const Var& bottleneck, const ModelParams& params) {
  const auto& cfg = params.config();
  const std::size_t B = cfg.bottleneck_size();
  const std::size_t C = cfg.encoder_channels().back();
  require_shape(bottleneck, {C, 1, B, B}, "coarse_decode");

  Var x = reshape(bottleneck, {C, B, B});
  for (const char* name : kDecoderNames) {
    x = upsample2x(leaky_relu(conv2d_named(x, params, name), kLeakyAlpha));
  }
  return relu(conv2d_named(x, params, "dec.out"));
}

Var coarse_forward(const Var& clip, const ModelParams& params) {
  return coarse_decode(coarse_encode(clip, params), params);
}

RefineOutput refine(const Var& coarse_map, const Var& last_frame, const ModelParams& params) {
  const auto& cfg = params.config();
  if (cfg.arch != Architecture::CoarseFine) throw std::logic_error("refine requires coarse_fine parameters");
  const std::size_t S = cfg.input_size;
  const std::size_t R = cfg.refine_resolution;
  require_shape(coarse_map, {1, S, S}, "refine(coarse_map)");
  require_shape(last_frame, {3, R, R}, "refine(last_frame)");

  Var up = coarse_map;
  for (std::size_t i = 0; i < cfg.refine_upsamplings(); ++i) up = upsample2x(up);
  Var stacked = concat0(up, last_frame);
  Var x = stacked;
  for (std::size_t i = 0; i < 3; ++i) x = leaky_relu(conv2d_named(x, params, kRefineNames[i]), kLeakyAlpha);
  return {stacked, relu(conv2d_named(x, params, kRefineNames[3]))};
}

CoarseFineOutput coarse_fine_forward(const Var& clip_cropped, const Var& clip_resized, const Var& last_frame,
                                     const ModelParams& params) {
  CoarseFineOutput out;
  out.cropped_map = coarse_forward(clip_cropped, params);
  out.resized_map = coarse_forward(clip_resized, params);
  auto refined = refine(out.resized_map, last_frame, params);
  out.refine_input = refined.input;
  out.refined_map = refined.map;
  return out;
}

}  // namespace drivegaze
