#include "twr/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace twr {

AdamState AdamState::zeros_like(const ParameterSet& params) {
  AdamState s;
  for (const Matrix& p : params.values()) {
    s.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    s.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return s;
}

void adam_step(ParameterSet& params, std::span<const Matrix> grads,
               AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(grads.size()) +
                                " gradients for " + std::to_string(params.size()) +
                                " parameters");
  }
  if (state.first_moment.empty()) state = AdamState::zeros_like(params);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " +
                                  params.name(i));
    }
    if (!grads[i].allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient in parameter " +
                               params.name(i));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    Matrix& p = params[i];
    const Matrix g = grads[i] + config.weight_decay * p;
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    p.array() -= config.learning_rate * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + config.epsilon);
  }
}

double clip_gradients(std::span<Matrix> grads, double max_norm) {
  if (!(max_norm > 0.0)) return 1.0;
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (Matrix& g : grads) g *= factor;
  return factor;
}

}  // namespace twr
