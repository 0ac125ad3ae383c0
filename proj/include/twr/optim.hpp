#pragma once

#include <span>
#include <vector>

#include "twr/autodiff.hpp"
#include "twr/params.hpp"

namespace twr {

struct AdamConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;  // coupled: decay * param is added to the gradient
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;

  /// Zero moments shaped like params.
  static AdamState zeros_like(const ParameterSet& params);
};

/// g <- grad + decay * p; m, v updated; p <- p - lr * m_hat / (sqrt(v_hat) + eps).
/// Throws std::runtime_error naming the parameter if any gradient is
/// non-finite; nothing is modified in that case.
void adam_step(ParameterSet& params, std::span<const Matrix> grads,
               AdamState& state, const AdamConfig& config);

/// Rescales grads to global L2 norm max_norm. A non-positive max_norm means
/// clipping is disabled and grads are left untouched. Returns the factor
/// applied (1 when nothing changed).
double clip_gradients(std::span<Matrix> grads, double max_norm);

}  // namespace twr
