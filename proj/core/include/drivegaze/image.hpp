#pragma once

#include <cstddef>

#include "drivegaze/tensor.hpp"

namespace drivegaze::image {

/// Bilinear resampling of the two trailing axes (half-pixel centres, edge
/// clamped). Leading axes are carried through, so 3 x 16 x H x W clips,
/// 3 x H x W frames and 1 x H x W maps all work. Output values are convex
/// combinations of input values.
Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w);

/// Window [y, y + h) x [x, x + w) of the two trailing axes.
Tensor crop(const Tensor& input, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

/// Divides by the maximum; an all-zero (or non-positive) input is returned unchanged.
Tensor max_normalized(const Tensor& input);

}  // namespace drivegaze::image
