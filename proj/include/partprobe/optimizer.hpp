#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace partprobe {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place. Shape error when
/// params, grads and state disagree in length.
void adam_step(AdamState& state, std::span<float> params, std::span<const float> grads,
               const AdamConfig& cfg);

/// Plain gradient descent, kept for comparison runs.
void sgd_step(std::span<float> params, std::span<const float> grads, double learning_rate);

}  // namespace partprobe
