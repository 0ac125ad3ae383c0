#pragma once

// Likelihood-side evaluation of a sentence VAE: NLL, perplexity, KL and
// mutual information between x and the decoder input z.
//
// Both NLL estimators draw z from q(z | x), the exact Gaussian of the
// decoder input (see decoder_input_posterior).
//   elbo_bound           E_q[-log p(x|z)] + KL(q(z|x) || p(z)), S draws
//   importance_weighted  -log (1/K sum_k p(x|z_k) p(z_k) / q(z_k|x))
// Every sentence predicts its tokens plus eos, which is the token count used
// for perplexity.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "twr/vae.hpp"

namespace twr {

enum class NllMode { ElboBound, ImportanceWeighted };

std::string_view to_string(NllMode m);
NllMode parse_nll_mode(std::string_view s);

struct NllEstimator {
  NllMode mode = NllMode::ImportanceWeighted;
  int samples = 100;  // K for importance weighting, draws per sentence otherwise

  void validate() const;
};

struct NllEstimate {
  double nll = 0.0;          // nats per sentence
  double ppl = 1.0;          // exp(total nll / total predicted tokens)
  long tokens = 0;
  std::vector<double> per_sentence;
};

/// Perplexity from a corpus total.
double perplexity(double total_nll, long tokens);

NllEstimate estimate_nll_ppl(const SentenceVae& model, std::span<const Sentence> corpus,
                             const NllEstimator& estimator, Rng& rng,
                             int batch_size = 64);

struct MiEstimate {
  double mi = 0.0;
  double mean_kl = 0.0;        // E_x KL(q(z|x) || p)
  double aggregate_kl = 0.0;   // KL(q(z) || p), Monte Carlo
  double std_error = 0.0;      // of aggregate_kl
};

/// I(x, z) = E_x KL(q(z|x) || p) - KL(q(z) || p) over the given posteriors,
/// with q(z) the uniform mixture over them. Each posterior contributes
/// `draws` samples to the second term.
MiEstimate mutual_information(std::span<const DiagGaussian> posteriors, int draws, Rng& rng);

/// Posteriors of the decoder input for the first `points` sentences of a
/// random permutation of the corpus (all of them if fewer).
std::vector<DiagGaussian> sample_posteriors(const SentenceVae& model,
                                            std::span<const Sentence> corpus, int points,
                                            Rng& rng, int batch_size = 64);

MiEstimate mutual_information(const SentenceVae& model, std::span<const Sentence> corpus,
                              int points, int draws, Rng& rng);

struct EvalConfig {
  NllEstimator nll;
  int mi_points = 500;
  int mi_draws = 1;
  int batch_size = 64;
  std::uint64_t seed = 1;
};

struct LmReport {
  double nll = 0.0;
  double ppl = 1.0;
  double kl = 0.0;                // mean kl_avg of the training objective
  double kl_decoder_input = 0.0;  // mean KL(q(z|x) || p) of the decoder input
  double mi = 0.0;
  double mi_std_error = 0.0;
  long tokens = 0;
  std::size_t sentences = 0;
  EvalConfig config;
};

/// NLL/PPL, KL and MI with sub-seeds derive_seed(seed, "nll" | "kl" | "mi").
LmReport evaluate(const SentenceVae& model, std::span<const Sentence> corpus,
                  const EvalConfig& config);

/// Long-format CSV: dataset, model, metric, value, estimator.
void write_report_csv(const std::vector<std::pair<std::string, LmReport>>& rows,
                      const std::string& dataset, const std::filesystem::path& path);

}  // namespace twr
