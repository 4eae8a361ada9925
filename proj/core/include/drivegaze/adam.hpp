#pragma once

#include <cstdint>

#include "drivegaze/tensor.hpp"

namespace drivegaze {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter tensor. m and v start at zero and
/// step counts completed updates.
struct AdamState {
  std::uint64_t step = 0;
  Tensor m;
  Tensor v;
  AdamConfig config;

  static AdamState zeros_like(const Tensor& param, AdamConfig config = {});
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state);

}  // namespace drivegaze
