#include "partprobe/optimizer.hpp"

#include <cmath>

#include "partprobe/error.hpp"

namespace partprobe {

void adam_step(AdamState& state, std::span<float> params, std::span<const float> grads,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    fail(ErrorKind::shape, "adam: parameter, gradient and state sizes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] = static_cast<float>(params[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

void sgd_step(std::span<float> params, std::span<const float> grads, double learning_rate) {
  if (params.size() != grads.size()) fail(ErrorKind::shape, "sgd: parameter and gradient sizes differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] = static_cast<float>(params[i] - learning_rate * grads[i]);
  }
}

}  // namespace partprobe
