#include "drivegaze/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <memory>
#include <string>

namespace drivegaze::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Geometry shared by the 2D and 3D same-padding convolutions. A conv2d is a
// conv3d with T == 1 and a temporal kernel extent of 1.
struct ConvGeom {
  std::size_t c_in, c_out, t, h, w;
  std::size_t kt, kh, kw;

  std::size_t plane() const { return h * w; }
  std::size_t taps() const { return kt * kh * kw; }
  std::size_t col_rows() const { return c_in * taps(); }
};

// Unfolds the 2D receptive fields of input frame `ts` into a
// (c_in * kh * kw) x (h * w) matrix, zero outside the frame.
void im2col_frame(const double* in, const ConvGeom& g, std::size_t ts, double* cols) {
  const std::size_t hw = g.plane();
  const auto ph = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const double* plane = in + (c * g.t + ts) * hw;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx, ++row) {
        double* dst = cols + row * hw;
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - ph;
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pw;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - ox);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          double* drow = dst + y * W;
          const std::ptrdiff_t ys = y + oy;
          if (ys < 0 || ys >= H) {
            std::fill(drow, drow + W, 0.0);
            continue;
          }
          const double* srow = plane + ys * W;
          std::fill(drow, drow + x0, 0.0);
          std::copy(srow + x0 + ox, srow + x1 + ox, drow + x0);
          std::fill(drow + x1, drow + W, 0.0);
        }
      }
    }
  }
}

// Adjoint of im2col_frame: scatters column gradients onto input frame `ts`.
void col2im_frame_add(const double* cols, const ConvGeom& g, std::size_t ts, double* grad_in) {
  const std::size_t hw = g.plane();
  const auto ph = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const auto H = static_cast<std::ptrdiff_t>(g.h);
  const auto W = static_cast<std::ptrdiff_t>(g.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c_in; ++c) {
    double* plane = grad_in + (c * g.t + ts) * hw;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx, ++row) {
        const double* src = cols + row * hw;
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(dy) - ph;
        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(dx) - pw;
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -ox);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - ox);
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          const std::ptrdiff_t ys = y + oy;
          if (ys < 0 || ys >= H) continue;
          const double* srow = src + y * W;
          double* drow = plane + ys * W;
          for (std::ptrdiff_t x = x0; x < x1; ++x) drow[x + ox] += srow[x];
        }
      }
    }
  }
}

ConvGeom conv3d_geom(const Tensor& input, const Tensor& weight, const char* what) {
  require_rank(input, 4, what);
  require_rank(weight, 5, what);
  if (weight.dim(1) != input.dim(0)) {
    throw ShapeError(std::string(what) + ": kernel expects " + std::to_string(weight.dim(1)) +
                     " input channels but input has shape " + shape_str(input.shape()));
  }
  if (weight.dim(2) != 3 || weight.dim(3) != 3 || weight.dim(4) != 3) {
    throw ShapeError(std::string(what) + ": kernel must be 3x3x3, got " + shape_str(weight.shape()));
  }
  return {input.dim(0), weight.dim(0), input.dim(1), input.dim(2), input.dim(3), 3, 3, 3};
}

ConvGeom conv2d_geom(const Tensor& input, const Tensor& weight, const char* what) {
  require_rank(input, 3, what);
  require_rank(weight, 4, what);
  if (weight.dim(1) != input.dim(0)) {
    throw ShapeError(std::string(what) + ": kernel expects " + std::to_string(weight.dim(1)) +
                     " input channels but input has shape " + shape_str(input.shape()));
  }
  if (weight.dim(2) != 3 || weight.dim(3) != 3) {
    throw ShapeError(std::string(what) + ": kernel must be 3x3, got " + shape_str(weight.shape()));
  }
  return {input.dim(0), weight.dim(0), 1, input.dim(1), input.dim(2), 1, 3, 3};
}

void check_bias(const Tensor& bias, std::size_t c_out, const char* what) {
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    throw ShapeError(std::string(what) + ": bias must have shape " + std::to_string(c_out) + ", got " +
                     shape_str(bias.shape()));
  }
}

// Uninitialised scratch; every element is written before it is read.
std::unique_ptr<double[]> scratch(std::size_t n) { return std::unique_ptr<double[]>(new double[n]); }

// Kernel C' x C x kt x kh x kw regrouped into kt matrices of C' x (C kh kw),
// one per temporal tap, matching the row order of im2col_frame.
std::vector<double> pack_by_tap(const double* weight, const ConvGeom& g) {
  const std::size_t k2 = g.kh * g.kw;
  const std::size_t r2 = g.c_in * k2;
  std::vector<double> packed(g.kt * g.c_out * r2);
  for (std::size_t co = 0; co < g.c_out; ++co) {
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      for (std::size_t dt = 0; dt < g.kt; ++dt) {
        const double* src = weight + ((co * g.c_in + ci) * g.kt + dt) * k2;
        std::copy(src, src + k2, packed.data() + (dt * g.c_out + co) * r2 + ci * k2);
      }
    }
  }
  return packed;
}

void unpack_by_tap_add(const std::vector<double>& packed, const ConvGeom& g, double* weight) {
  const std::size_t k2 = g.kh * g.kw;
  const std::size_t r2 = g.c_in * k2;
  for (std::size_t co = 0; co < g.c_out; ++co) {
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      for (std::size_t dt = 0; dt < g.kt; ++dt) {
        const double* src = packed.data() + (dt * g.c_out + co) * r2 + ci * k2;
        double* dst = weight + ((co * g.c_in + ci) * g.kt + dt) * k2;
        for (std::size_t k = 0; k < k2; ++k) dst[k] += src[k];
      }
    }
  }
}

// Each input frame is unfolded once; output frame t sums the temporal taps
// W_dt * cols(t + dt - kt / 2) over the frames that exist.
void conv_forward(const ConvGeom& g, const double* in, const double* weight, const double* bias, double* out) {
  const std::size_t hw = g.plane();
  const std::size_t r2 = g.c_in * g.kh * g.kw;
  const auto rows = static_cast<Eigen::Index>(r2);
  const auto cout = static_cast<Eigen::Index>(g.c_out);
  const auto pt = static_cast<std::ptrdiff_t>(g.kt / 2);
  const auto packed = pack_by_tap(weight, g);
  auto cols = scratch(g.t * r2 * hw);
  for (std::size_t ts = 0; ts < g.t; ++ts) im2col_frame(in, g, ts, cols.get() + ts * r2 * hw);
  for (std::size_t t = 0; t < g.t; ++t) {
    StridedMap om(out + t * hw, cout, static_cast<Eigen::Index>(hw),
                  Eigen::OuterStride<>(static_cast<Eigen::Index>(g.t * hw)));
    for (std::size_t co = 0; co < g.c_out; ++co) om.row(static_cast<Eigen::Index>(co)).setConstant(bias[co]);
    for (std::size_t dt = 0; dt < g.kt; ++dt) {
      const std::ptrdiff_t ts = static_cast<std::ptrdiff_t>(t + dt) - pt;
      if (ts < 0 || ts >= static_cast<std::ptrdiff_t>(g.t)) continue;
      Eigen::Map<const RowMat> wm(packed.data() + dt * g.c_out * r2, cout, rows);
      Eigen::Map<const RowMat> cm(cols.get() + static_cast<std::size_t>(ts) * r2 * hw, rows,
                                  static_cast<Eigen::Index>(hw));
      om.noalias() += wm * cm;
    }
  }
}

void conv_backward(const ConvGeom& g, const double* in, const double* weight, const double* grad_out,
                   double* grad_in, double* grad_w, double* grad_b) {
  const std::size_t hw = g.plane();
  const std::size_t r2 = g.c_in * g.kh * g.kw;
  const auto rows = static_cast<Eigen::Index>(r2);
  const auto cout = static_cast<Eigen::Index>(g.c_out);
  const auto pt = static_cast<std::ptrdiff_t>(g.kt / 2);
  const auto packed = pack_by_tap(weight, g);
  std::vector<double> packed_grad(packed.size(), 0.0);
  auto cols = scratch(g.t * r2 * hw);
  std::vector<double> dcols(grad_in ? g.t * r2 * hw : 0, 0.0);
  for (std::size_t ts = 0; ts < g.t; ++ts) im2col_frame(in, g, ts, cols.get() + ts * r2 * hw);
  for (std::size_t t = 0; t < g.t; ++t) {
    ConstStridedMap gm(grad_out + t * hw, cout, static_cast<Eigen::Index>(hw),
                       Eigen::OuterStride<>(static_cast<Eigen::Index>(g.t * hw)));
    for (std::size_t dt = 0; dt < g.kt; ++dt) {
      const std::ptrdiff_t ts = static_cast<std::ptrdiff_t>(t + dt) - pt;
      if (ts < 0 || ts >= static_cast<std::ptrdiff_t>(g.t)) continue;
      const std::size_t off = static_cast<std::size_t>(ts) * r2 * hw;
      Eigen::Map<const RowMat> wm(packed.data() + dt * g.c_out * r2, cout, rows);
      Eigen::Map<RowMat> gw(packed_grad.data() + dt * g.c_out * r2, cout, rows);
      Eigen::Map<const RowMat> cm(cols.get() + off, rows, static_cast<Eigen::Index>(hw));
      gw.noalias() += gm * cm.transpose();
      if (!grad_in) continue;
      Eigen::Map<RowMat> dm(dcols.data() + off, rows, static_cast<Eigen::Index>(hw));
      dm.noalias() += wm.transpose() * gm;
    }
  }
  if (grad_in) {
    for (std::size_t ts = 0; ts < g.t; ++ts) col2im_frame_add(dcols.data() + ts * r2 * hw, g, ts, grad_in);
  }
  unpack_by_tap_add(packed_grad, g, grad_w);
  const std::size_t per_channel = g.t * hw;
  for (std::size_t co = 0; co < g.c_out; ++co) {
    const double* src = grad_out + co * per_channel;
    double acc = 0.0;
    for (std::size_t i = 0; i < per_channel; ++i) acc += src[i];
    grad_b[co] = acc;
  }
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const ConvGeom g = conv3d_geom(input, weight, "conv3d");
  check_bias(bias, g.c_out, "conv3d");
  Tensor out({g.c_out, g.t, g.h, g.w});
  conv_forward(g, input.data().data(), weight.data().data(), bias.data().data(), out.data().data());
  return out;
}

ConvGrads conv3d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, bool input_grad) {
  const ConvGeom g = conv3d_geom(input, weight, "conv3d_backward");
  if (grad_out.shape() != Shape{g.c_out, g.t, g.h, g.w}) {
    throw ShapeError("conv3d_backward: gradient shape " + shape_str(grad_out.shape()) + " does not match output");
  }
  ConvGrads grads{input_grad ? Tensor(input.shape()) : Tensor(), Tensor(weight.shape()), Tensor(Shape{g.c_out})};
  conv_backward(g, input.data().data(), weight.data().data(), grad_out.data().data(),
                input_grad ? grads.input.data().data() : nullptr,
                grads.weight.data().data(), grads.bias.data().data());
  return grads;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  const ConvGeom g = conv2d_geom(input, weight, "conv2d");
  check_bias(bias, g.c_out, "conv2d");
  Tensor out({g.c_out, g.h, g.w});
  conv_forward(g, input.data().data(), weight.data().data(), bias.data().data(), out.data().data());
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out, bool input_grad) {
  const ConvGeom g = conv2d_geom(input, weight, "conv2d_backward");
  if (grad_out.shape() != Shape{g.c_out, g.h, g.w}) {
    throw ShapeError("conv2d_backward: gradient shape " + shape_str(grad_out.shape()) + " does not match output");
  }
  ConvGrads grads{input_grad ? Tensor(input.shape()) : Tensor(), Tensor(weight.shape()), Tensor(Shape{g.c_out})};
  conv_backward(g, input.data().data(), weight.data().data(), grad_out.data().data(),
                input_grad ? grads.input.data().data() : nullptr,
                grads.weight.data().data(), grads.bias.data().data());
  return grads;
}

PoolResult max_pool3d(const Tensor& input, PoolSize pool) {
  require_rank(input, 4, "max_pool3d");
  for (std::size_t a = 0; a < 3; ++a) {
    if (pool[a] != 1 && pool[a] != 2) throw ShapeError("max_pool3d: pool extents must be 1 or 2");
    if (input.dim(a + 1) % pool[a] != 0) {
      throw ShapeError("max_pool3d: input " + shape_str(input.shape()) + " not divisible by pool " +
                       shape_str(Shape(pool.begin(), pool.end())));
    }
  }
  const std::size_t C = input.dim(0), T = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t To = T / pool[0], Ho = H / pool[1], Wo = W / pool[2];
  PoolResult result{Tensor({C, To, Ho, Wo}), {}};
  result.argmax.resize(result.output.numel());
  const double* in = input.data().data();
  double* out = result.output.data().data();
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < To; ++t) {
      for (std::size_t y = 0; y < Ho; ++y) {
        for (std::size_t x = 0; x < Wo; ++x, ++o) {
          std::size_t best = ((c * T + t * pool[0]) * H + y * pool[1]) * W + x * pool[2];
          for (std::size_t dt = 0; dt < pool[0]; ++dt) {
            for (std::size_t dy = 0; dy < pool[1]; ++dy) {
              for (std::size_t dx = 0; dx < pool[2]; ++dx) {
                const std::size_t idx =
                    ((c * T + t * pool[0] + dt) * H + y * pool[1] + dy) * W + x * pool[2] + dx;
                if (in[idx] > in[best]) best = idx;
              }
            }
          }
          out[o] = in[best];
          result.argmax[o] = best;
        }
      }
    }
  }
  return result;
}

Tensor max_pool3d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                           const Tensor& grad_out) {
  if (argmax.size() != grad_out.numel()) throw ShapeError("max_pool3d_backward: argmax/gradient size mismatch");
  Tensor grad_in(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_in[argmax[i]] += grad_out[i];
  return grad_in;
}

Tensor upsample2x(const Tensor& input) {
  require_rank(input, 3, "upsample2x");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  Tensor out({C, 2 * H, 2 * W});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < 2 * H; ++y) {
      const double* src = input.data().data() + (c * H + y / 2) * W;
      double* dst = out.data().data() + (c * 2 * H + y) * 2 * W;
      for (std::size_t x = 0; x < 2 * W; ++x) dst[x] = src[x / 2];
    }
  }
  return out;
}

Tensor upsample2x_backward(const Tensor& grad_out) {
  require_rank(grad_out, 3, "upsample2x_backward");
  if (grad_out.dim(1) % 2 || grad_out.dim(2) % 2) throw ShapeError("upsample2x_backward: odd extents");
  const std::size_t C = grad_out.dim(0), H = grad_out.dim(1) / 2, W = grad_out.dim(2) / 2;
  Tensor grad_in({C, H, W});
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < 2 * H; ++y) {
      const double* src = grad_out.data().data() + (c * 2 * H + y) * 2 * W;
      double* dst = grad_in.data().data() + (c * H + y / 2) * W;
      for (std::size_t x = 0; x < 2 * W; ++x) dst[x / 2] += src[x];
    }
  }
  return grad_in;
}

Tensor avg_pool2x(const Tensor& input) { return upsample2x_backward(input) * 0.25; }

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_same_shape(input, grad_out, "relu_backward");
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.numel(); ++i) {
    if (!(input[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

Tensor leaky_relu(const Tensor& input, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("leaky_relu: alpha must be >= 0");
  Tensor out = input;
  for (auto& v : out.data()) v = v >= 0.0 ? v : alpha * v;
  return out;
}

Tensor leaky_relu_backward(const Tensor& input, const Tensor& grad_out, double alpha) {
  require_same_shape(input, grad_out, "leaky_relu_backward");
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.numel(); ++i) {
    if (input[i] < 0.0) grad[i] *= alpha;
  }
  return grad;
}

double mse(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.numel(); ++i) {
    const double d = prediction[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.numel());
}

Tensor mse_backward(const Tensor& prediction, const Tensor& target, double grad_out) {
  require_same_shape(prediction, target, "mse_backward");
  Tensor grad(prediction.shape());
  const double scale = 2.0 * grad_out / static_cast<double>(prediction.numel());
  for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] = scale * (prediction[i] - target[i]);
  return grad;
}

Tensor concat0(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError("concat0: trailing extents differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<double> data;
  data.reserve(a.numel() + b.numel());
  data.insert(data.end(), a.storage().begin(), a.storage().end());
  data.insert(data.end(), b.storage().begin(), b.storage().end());
  return Tensor(std::move(shape), std::move(data));
}

Tensor flip_horizontal(const Tensor& input) {
  const std::size_t W = input.shape().back();
  Tensor out(input.shape());
  const std::size_t rows = input.numel() / W;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = input.data().data() + r * W;
    double* dst = out.data().data() + r * W;
    for (std::size_t x = 0; x < W; ++x) dst[x] = src[W - 1 - x];
  }
  return out;
}

}  // namespace drivegaze::ops
