#pragma once

// Finite-difference certification of the full training objectives on tiny
// models. Every case draws its own parameters (uniform in [-0.5, 0.5]) and
// evaluates the loss with the same frozen noise on each perturbation.

#include <cstdint>
#include <string>
#include <vector>

#include "twr/autodiff.hpp"
#include "twr/vae.hpp"

namespace twr {

struct GradCheckCase {
  std::string model = "sentence";  // "sentence" or "dialogue"
  CellFamily cell = CellFamily::Lstm;
  ElboVariant variant = ElboVariant::Twr;
  CombineMode combine = CombineMode::Final;
  double reg_fraction = 1.0;

  std::string label() const;
};

struct GradCheckRow {
  GradCheckCase config;
  GradCheckResult result;
  bool pass = false;
  double seconds = 0.0;
};

/// {rnn, gru, lstm} x {basic, twr} x {final, mean, sum} x {0.25, 0.5, 0.75, 1}
/// for the sentence VAE, optionally followed by the dialogue model under both
/// variants.
std::vector<GradCheckCase> default_grad_check_cases(bool include_dialogue = true);

/// Two toy sentences over a 12-token vocabulary: one of 8 tokens, one of 5.
Batch grad_check_batch();

GradCheckRow run_grad_check(const GradCheckCase& c, std::uint64_t seed = 1,
                            double tolerance = 1e-6);

}  // namespace twr
