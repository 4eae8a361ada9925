#include "drivegaze/adam.hpp"

#include <cmath>

namespace drivegaze {

AdamState AdamState::zeros_like(const Tensor& param, AdamConfig config) {
  return AdamState{0, Tensor(param.shape()), Tensor(param.shape()), config};
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
  require_same_shape(param, grad, "adam_step(param, grad)");
  require_same_shape(param, state.m, "adam_step(param, m)");
  require_same_shape(param, state.v, "adam_step(param, v)");

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(c.beta1, t);
  const double v_correction = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double g = grad[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / m_correction;
    const double v_hat = state.v[i] / v_correction;
    param[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace drivegaze
