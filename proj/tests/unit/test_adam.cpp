#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drivegaze/adam.hpp"
#include "test_support.hpp"

namespace drivegaze {
namespace {

// Scalar reference recurrence.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double update(double p, double g, const AdamConfig& c) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t));
    const double vh = v / (1 - std::pow(c.beta2, t));
    return p - c.learning_rate * mh / (std::sqrt(vh) + c.epsilon);
  }
};

TEST(Adam, MatchesScalarRecurrence) {
  std::mt19937_64 rng(20);
  const AdamConfig cfg{};
  Tensor p = testing::random_tensor({7}, rng);
  std::vector<ScalarAdam> ref(7);
  std::vector<double> expected(p.data().begin(), p.data().end());
  AdamState state = AdamState::zeros_like(p, cfg);
  for (int step = 0; step < 25; ++step) {
    const Tensor g = testing::random_tensor({7}, rng, -3.0, 3.0);
    adam_step(p, g, state);
    for (std::size_t i = 0; i < 7; ++i) expected[i] = ref[i].update(expected[i], g[i], cfg);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(p[i], expected[i], 1e-14);
  }
  EXPECT_EQ(state.step, 25u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // After bias correction the first update is lr * g / (|g| + eps).
  Tensor p({3}, std::vector<double>{0.0, 1.0, -1.0});
  const Tensor g({3}, std::vector<double>{2.0, -0.5, 1e-3});
  AdamState s = AdamState::zeros_like(p);
  adam_step(p, g, s);
  EXPECT_NEAR(p[0], -1e-3, 1e-10);
  EXPECT_NEAR(p[1], 1.0 + 1e-3, 1e-10);
  EXPECT_NEAR(p[2], -1.0 - 1e-3 * 1e-3 / (1e-3 + 1e-8), 1e-12);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::mt19937_64 rng(21);
  Tensor p = testing::random_tensor({2, 3}, rng);
  const Tensor before = p;
  AdamState s = AdamState::zeros_like(p);
  for (int i = 0; i < 3; ++i) adam_step(p, Tensor(p.shape()), s);
  EXPECT_EQ(p, before);
}

TEST(Adam, ShapeMismatchRejected) {
  Tensor p({3});
  AdamState s = AdamState::zeros_like(p);
  EXPECT_THROW(adam_step(p, Tensor({4}), s), ShapeError);
}

}  // namespace
}  // namespace drivegaze
