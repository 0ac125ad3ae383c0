#pragma once

// Closed-form quantities for diagonal Gaussians, parameterised by mean and
// log-variance. Free functions over Eigen expressions; every argument may be a
// vector, a matrix, or any expression of matching shape.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

#include <Eigen/Dense>

namespace twr {

/// KL(N(mu, exp(log_var)) || N(0, I)) in nats, summed over all coordinates.
template <class Mu, class LogVar>
typename Mu::Scalar kl_standard_normal(const Eigen::MatrixBase<Mu>& mu,
                                       const Eigen::MatrixBase<LogVar>& log_var) {
  using S = typename Mu::Scalar;
  return S(0.5) * (mu.array().square() + log_var.array().exp() - S(1) -
                   log_var.array())
                      .sum();
}

/// Row-wise KL to the standard normal; one entry per row.
template <class Mu, class LogVar>
Eigen::Matrix<typename Mu::Scalar, Eigen::Dynamic, 1> kl_standard_normal_rows(
    const Eigen::MatrixBase<Mu>& mu, const Eigen::MatrixBase<LogVar>& log_var) {
  using S = typename Mu::Scalar;
  return S(0.5) * (mu.array().square() + log_var.array().exp() - S(1) -
                   log_var.array())
                      .matrix()
                      .rowwise()
                      .sum();
}

/// KL(N(mu_q, exp(lv_q)) || N(mu_p, exp(lv_p))) summed over coordinates.
template <class MuQ, class LvQ, class MuP, class LvP>
typename MuQ::Scalar kl_diag_gaussians(const Eigen::MatrixBase<MuQ>& mu_q,
                                       const Eigen::MatrixBase<LvQ>& lv_q,
                                       const Eigen::MatrixBase<MuP>& mu_p,
                                       const Eigen::MatrixBase<LvP>& lv_p) {
  using S = typename MuQ::Scalar;
  return S(0.5) *
         (lv_p.array() - lv_q.array() + (lv_q.array() - lv_p.array()).exp() +
          (mu_q.array() - mu_p.array()).square() * (-lv_p.array()).exp() - S(1))
             .sum();
}

/// log N(z; mu, exp(log_var)) summed over coordinates.
template <class Z, class Mu, class LogVar>
typename Z::Scalar log_normal_density(const Eigen::MatrixBase<Z>& z,
                                      const Eigen::MatrixBase<Mu>& mu,
                                      const Eigen::MatrixBase<LogVar>& log_var) {
  using S = typename Z::Scalar;
  const S log_two_pi = std::log(S(2) * std::numbers::pi_v<S>);
  return S(-0.5) * (log_two_pi + log_var.array() +
                    (z.array() - mu.array()).square() * (-log_var.array()).exp())
                       .sum();
}

/// log N(z; 0, I) summed over coordinates.
template <class Z>
typename Z::Scalar log_standard_normal_density(const Eigen::MatrixBase<Z>& z) {
  using S = typename Z::Scalar;
  const S log_two_pi = std::log(S(2) * std::numbers::pi_v<S>);
  return S(-0.5) * (S(z.size()) * log_two_pi + z.squaredNorm());
}

/// z = mu + exp(log_var / 2) * eps.
template <class Mu, class LogVar, class Eps>
auto reparameterize(const Eigen::MatrixBase<Mu>& mu,
                    const Eigen::MatrixBase<LogVar>& log_var,
                    const Eigen::MatrixBase<Eps>& eps) {
  using S = typename Mu::Scalar;
  return (mu.array() + (S(0.5) * log_var.array()).exp() * eps.array()).matrix();
}

/// Stabilised log(sum(exp(x))).
template <class S>
S log_sum_exp(std::span<const S> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  S top = values[0];
  for (S v : values) top = v > top ? v : top;
  if (!std::isfinite(top)) return top;
  S acc = 0;
  for (S v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

}  // namespace twr
