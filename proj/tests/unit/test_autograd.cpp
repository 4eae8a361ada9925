#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "drivegaze/autograd.hpp"
#include "test_support.hpp"

namespace drivegaze {
namespace {

using testing::numeric_gradient;
using testing::random_tensor;
using testing::relative_error;

constexpr int kInstances = 20;
constexpr double kTolerance = 1e-4;

// Values bounded away from zero so central differences never straddle a kink.
Tensor away_from_zero(const Shape& shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(shape, rng);
  for (auto& v : t.data()) v = v >= 0 ? v + 0.01 : v - 0.01;
  return t;
}

// Distinct, well separated values so max-pool winners are stable under h.
Tensor separated(const Shape& shape, std::mt19937_64& rng) {
  Tensor t(shape);
  std::vector<std::size_t> order(t.numel());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = 0.01 * static_cast<double>(order[i]) - 1.0;
  return t;
}

// Scalar loss mse(f(x), target); returns (analytic, numeric) gradients in x.
template <typename F>
std::pair<Tensor, Tensor> grads_through(F f, const Tensor& x, const Tensor& target) {
  Var xv = Var::parameter(x);
  backward(mse(f(xv), Var::constant(target)));
  const Tensor analytic = xv.grad();
  const Tensor numeric = numeric_gradient(
      [&](const Tensor& p) {
        NoGradGuard guard;
        return mse(f(Var::constant(p)), Var::constant(target)).value().item();
      },
      x);
  return {analytic, numeric};
}

TEST(Gradients, Conv3dInputWeightBias) {
  std::mt19937_64 rng(100);
  for (int i = 0; i < kInstances; ++i) {
    const Tensor x = random_tensor({2, 3, 4, 4}, rng);
    const Tensor w = random_tensor({2, 2, 3, 3, 3}, rng);
    const Tensor b = random_tensor({2}, rng);
    const Tensor target = random_tensor({2, 3, 4, 4}, rng);
    auto in = grads_through([&](const Var& v) { return conv3d(v, Var::constant(w), Var::constant(b)); }, x, target);
    EXPECT_LT(relative_error(in.first, in.second), kTolerance);
    auto wg = grads_through([&](const Var& v) { return conv3d(Var::constant(x), v, Var::constant(b)); }, w, target);
    EXPECT_LT(relative_error(wg.first, wg.second), kTolerance);
    auto bg = grads_through([&](const Var& v) { return conv3d(Var::constant(x), Var::constant(w), v); }, b, target);
    EXPECT_LT(relative_error(bg.first, bg.second), kTolerance);
  }
}

TEST(Gradients, Conv2dInputWeightBias) {
  std::mt19937_64 rng(101);
  for (int i = 0; i < kInstances; ++i) {
    const Tensor x = random_tensor({3, 5, 4}, rng);
    const Tensor w = random_tensor({2, 3, 3, 3}, rng);
    const Tensor b = random_tensor({2}, rng);
    const Tensor target = random_tensor({2, 5, 4}, rng);
    auto in = grads_through([&](const Var& v) { return conv2d(v, Var::constant(w), Var::constant(b)); }, x, target);
    EXPECT_LT(relative_error(in.first, in.second), kTolerance);
    auto wg = grads_through([&](const Var& v) { return conv2d(Var::constant(x), v, Var::constant(b)); }, w, target);
    EXPECT_LT(relative_error(wg.first, wg.second), kTolerance);
    auto bg = grads_through([&](const Var& v) { return conv2d(Var::constant(x), Var::constant(w), v); }, b, target);
    EXPECT_LT(relative_error(bg.first, bg.second), kTolerance);
  }
}

TEST(Gradients, MaxPool3d) {
  std::mt19937_64 rng(102);
  const std::array<ops::PoolSize, 3> pools{{{1, 2, 2}, {2, 2, 2}, {2, 1, 1}}};
  for (int i = 0; i < kInstances; ++i) {
    const auto pool = pools[static_cast<std::size_t>(i) % pools.size()];
    const Tensor x = separated({2, 4, 4, 4}, rng);
    const Shape out{2, 4 / pool[0], 4 / pool[1], 4 / pool[2]};
    const Tensor target = random_tensor(out, rng);
    auto g = grads_through([&](const Var& v) { return max_pool3d(v, pool); }, x, target);
    EXPECT_LT(relative_error(g.first, g.second), kTolerance);
  }
}

TEST(Gradients, Upsample2x) {
  std::mt19937_64 rng(103);
  for (int i = 0; i < kInstances; ++i) {
    const Tensor x = random_tensor({2, 3, 4}, rng);
    const Tensor target = random_tensor({2, 6, 8}, rng);
    auto g = grads_through([](const Var& v) { return upsample2x(v); }, x, target);
    EXPECT_LT(relative_error(g.first, g.second), kTolerance);
  }
}

TEST(Gradients, ReluAndLeakyRelu) {
  std::mt19937_64 rng(104);
  for (int i = 0; i < kInstances; ++i) {
    const Tensor x = away_from_zero({3, 4, 4}, rng);
    const Tensor target = random_tensor({3, 4, 4}, rng);
    auto r = grads_through([](const Var& v) { return relu(v); }, x, target);
    EXPECT_LT(relative_error(r.first, r.second), kTolerance);
    auto l = grads_through([](const Var& v) { return leaky_relu(v, 0.001); }, x, target);
    EXPECT_LT(relative_error(l.first, l.second), kTolerance);
  }
}

TEST(Gradients, MseBothArguments) {
  std::mt19937_64 rng(105);
  for (int i = 0; i < kInstances; ++i) {
    const Tensor p = random_tensor({4, 5}, rng);
    const Tensor t = random_tensor({4, 5}, rng);
    Var pv = Var::parameter(p);
    Var tv = Var::parameter(t);
    backward(mse(pv, tv));
    const Tensor np = numeric_gradient([&](const Tensor& q) { return ops::mse(q, t); }, p);
    const Tensor nt = numeric_gradient([&](const Tensor& q) { return ops::mse(p, q); }, t);
    EXPECT_LT(relative_error(pv.grad(), np), kTolerance);
    EXPECT_LT(relative_error(tv.grad(), nt), kTolerance);
  }
}

TEST(Gradients, ConcatScaleAddReshape) {
  std::mt19937_64 rng(106);
  for (int i = 0; i < kInstances; ++i) {
    const Tensor a = random_tensor({1, 3, 3}, rng);
    const Tensor b = random_tensor({2, 3, 3}, rng);
    const Tensor target = random_tensor({27}, rng);
    auto g = grads_through(
        [&](const Var& v) { return reshape(scale(add(concat0(v, Var::constant(b)), concat0(v, Var::constant(b))), 0.3), {27}); },
        a, target);
    EXPECT_LT(relative_error(g.first, g.second), kTolerance);
  }
}

TEST(Backward, ScalarWeightTimesInput) {
  // loss = mse(w * x, t) with w a 1x1x3x3 kernel that is zero except its centre.
  const double x = 1.7, t = 0.4, w0 = -0.6;
  Tensor kernel({1, 1, 3, 3});
  kernel.at({0, 0, 1, 1}) = w0;
  Var w = Var::parameter(kernel);
  Var out = conv2d(Var::constant(Tensor({1, 1, 1}, x)), w, Var::constant(Tensor({1})));
  backward(mse(out, Var::constant(Tensor({1, 1, 1}, t))));
  EXPECT_NEAR(w.grad().at({0, 0, 1, 1}), 2.0 * x * (w0 * x - t), 1e-14);
}

TEST(Backward, NonScalarRootRejected) {
  Var w = Var::parameter(Tensor({2, 2}, 1.0));
  EXPECT_THROW(backward(relu(w)), std::invalid_argument);
}

TEST(Backward, ConstantLossGivesZeroGradient) {
  Var w = Var::parameter(Tensor({3}, 2.0));
  Var c = mse(Var::constant(Tensor({3}, 1.0)), Var::constant(Tensor({3}, 0.0)));
  backward(c);
  EXPECT_EQ(w.grad(), Tensor({3}));
}

TEST(Backward, SharedParameterAccumulates) {
  Var w = Var::parameter(Tensor({1}, 3.0));
  Var target = Var::constant(Tensor({1}, 0.0));
  backward(add(mse(w, target), mse(w, target)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0 * 2.0 * 3.0);
}

TEST(Backward, NoGradGuardSkipsTape) {
  Var w = Var::parameter(Tensor({1}, 3.0));
  NoGradGuard guard;
  Var y = relu(w);
  EXPECT_FALSE(y.requires_grad());
}

}  // namespace
}  // namespace drivegaze
