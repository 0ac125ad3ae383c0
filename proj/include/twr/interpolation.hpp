#pragma once

// Linear interpolation between the latent codes of two sentences, decoded
// greedily at each mixing weight and scored with ROUGE against both inputs.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "twr/text_metrics.hpp"
#include "twr/vae.hpp"

namespace twr {

enum class LatentSource { PosteriorMean, Sample };

std::string_view to_string(LatentSource s);
LatentSource parse_latent_source(std::string_view s);

/// z1 * (1 - alpha) + z2 * alpha. Alpha must lie in [0, 1].
RowVector interpolate_latents(const RowVector& z1, const RowVector& z2, double alpha);

/// 0, 0.1, ..., 1 as exact decimal fractions.
std::vector<double> default_alphas(int steps = 10);

struct RougeTriple {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
};

RougeTriple rouge_all(const Sentence& hypothesis, const Sentence& reference);

struct InterpolationPoint {
  double alpha = 0.0;
  RowVector z;
  Sentence decoded;
  RougeTriple vs_first;
  RougeTriple vs_second;
};

struct InterpolationSweep {
  Sentence first;
  Sentence second;
  RowVector z1;
  RowVector z2;
  std::vector<InterpolationPoint> points;
};

/// Latent code of each sentence: the decoder-input posterior mean, or one
/// draw from it.
std::vector<RowVector> latent_codes(const SentenceVae& model, std::span<const Sentence> sentences,
                                    LatentSource source, Rng& rng);

/// alphas must be sorted, within [0, 1], and include both endpoints.
InterpolationSweep interpolation_sweep(const SentenceVae& model, const Sentence& first,
                                       const Sentence& second, std::span<const double> alphas,
                                       LatentSource source, Rng& rng, int max_len = 40);

/// Sweeps consecutive pairs (0,1), (2,3), ... of the corpus, at most max_pairs.
std::vector<InterpolationSweep> corpus_sweeps(const SentenceVae& model,
                                              std::span<const Sentence> corpus,
                                              std::span<const double> alphas,
                                              LatentSource source, Rng& rng,
                                              std::size_t max_pairs, int max_len = 40);

struct AlphaCurve {
  std::vector<double> alphas;
  std::vector<RougeTriple> vs_first;   // mean over sweeps
  std::vector<RougeTriple> vs_second;
};

AlphaCurve mean_curve(std::span<const InterpolationSweep> sweeps);

/// pair_id, alpha, decoded_text, rouge1_ref1, rouge2_ref1, rougeL_ref1,
/// rouge1_ref2, rouge2_ref2, rougeL_ref2
void write_sweeps_csv(std::span<const InterpolationSweep> sweeps, const Vocab& vocab,
                      const std::filesystem::path& path);

}  // namespace twr
