#include "drivegaze/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace drivegaze::image {

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> result(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    result[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return result;
}

}  // namespace

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  if (input.rank() < 2) throw ShapeError("resize_bilinear: rank must be >= 2");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output extents must be positive");
  const std::size_t H = input.shape()[input.rank() - 2];
  const std::size_t W = input.shape().back();
  Shape shape = input.shape();
  shape[shape.size() - 2] = out_h;
  shape.back() = out_w;
  if (H == out_h && W == out_w) return input;

  Tensor out(shape);
  const auto ty = taps(H, out_h);
  const auto tx = taps(W, out_w);
  const std::size_t planes = input.numel() / (H * W);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = input.data().data() + p * H * W;
    double* dst = out.data().data() + p * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const double* r0 = src + ty[y].lo * W;
      const double* r1 = src + ty[y].hi * W;
      const double fy = ty[y].frac;
      for (std::size_t x = 0; x < out_w; ++x) {
        const double fx = tx[x].frac;
        const double top = r0[tx[x].lo] + fx * (r0[tx[x].hi] - r0[tx[x].lo]);
        const double bot = r1[tx[x].lo] + fx * (r1[tx[x].hi] - r1[tx[x].lo]);
        dst[y * out_w + x] = top + fy * (bot - top);
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& input, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  if (input.rank() < 2) throw ShapeError("crop: rank must be >= 2");
  const std::size_t H = input.shape()[input.rank() - 2];
  const std::size_t W = input.shape().back();
  if (h == 0 || w == 0 || y + h > H || x + w > W) {
    throw ShapeError("crop: window exceeds input of shape " + shape_str(input.shape()));
  }
  Shape shape = input.shape();
  shape[shape.size() - 2] = h;
  shape.back() = w;
  Tensor out(shape);
  const std::size_t planes = input.numel() / (H * W);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t r = 0; r < h; ++r) {
      const double* src = input.data().data() + p * H * W + (y + r) * W + x;
      std::copy(src, src + w, out.data().data() + (p * h + r) * w);
    }
  }
  return out;
}

Tensor max_normalized(const Tensor& input) {
  const double peak = input.max();
  if (!(peak > 0.0)) return input;
  return input * (1.0 / peak);
}

}  // namespace drivegaze::image
