#pragma once

// Forward and backward kernels for the layer primitives. These operate on
// plain tensors; autograd.hpp wires them into the reverse-mode tape.

#include <array>
#include <cstddef>
#include <vector>

#include "drivegaze/tensor.hpp"

namespace drivegaze::ops {

struct ConvGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

/// Same-extent 3x3x3 convolution with zero padding 1.
/// input C x T x H x W, weight C' x C x 3 x 3 x 3, bias C'  ->  C' x T x H x W
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias);
/// With input_grad false the returned input gradient is an empty tensor.
ConvGrads conv3d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, bool input_grad = true);

/// Same-extent 3x3 convolution with zero padding 1.
/// input C x H x W, weight C' x C x 3 x 3, bias C'  ->  C' x H x W
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, bool input_grad = true);

using PoolSize = std::array<std::size_t, 3>;  // (t, h, w)

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input offset of each output cell's winner
};

/// Max pooling over non-overlapping (pt, ph, pw) windows, extents in {1, 2}.
/// Each extent of the C x T x H x W input must be divisible by its window.
PoolResult max_pool3d(const Tensor& input, PoolSize pool);
Tensor max_pool3d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                           const Tensor& grad_out);

/// Nearest-neighbour x2 upsampling of the two trailing axes of a C x H x W tensor.
Tensor upsample2x(const Tensor& input);
Tensor upsample2x_backward(const Tensor& grad_out);

/// 2x2 average pooling; the left inverse of upsample2x.
Tensor avg_pool2x(const Tensor& input);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

Tensor leaky_relu(const Tensor& input, double alpha);
Tensor leaky_relu_backward(const Tensor& input, const Tensor& grad_out, double alpha);

double mse(const Tensor& prediction, const Tensor& target);
/// d mse / d prediction; the gradient w.r.t. the target is its negation.
Tensor mse_backward(const Tensor& prediction, const Tensor& target, double grad_out);

/// Concatenate along axis 0; trailing extents must agree.
Tensor concat0(const Tensor& a, const Tensor& b);

/// Mirror the last axis: out[..., x] = in[..., W - 1 - x].
Tensor flip_horizontal(const Tensor& input);

}  // namespace drivegaze::ops
