#include "twr/interpolation.hpp"

#include <algorithm>
#include <stdexcept>

#include "twr/csv.hpp"
#include "twr/gaussian.hpp"

namespace twr {

std::string_view to_string(LatentSource s) {
  return s == LatentSource::PosteriorMean ? "posterior_mean" : "sample";
}

LatentSource parse_latent_source(std::string_view s) {
  if (s == "posterior_mean") return LatentSource::PosteriorMean;
  if (s == "sample") return LatentSource::Sample;
  throw std::invalid_argument("unknown latent source '" + std::string(s) +
                              "' (expected posterior_mean or sample)");
}

RowVector interpolate_latents(const RowVector& z1, const RowVector& z2, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("interpolate_latents: alpha " + std::to_string(alpha) +
                                " outside [0, 1]");
  }
  if (z1.cols() != z2.cols()) {
    throw std::invalid_argument("interpolate_latents: dimensions " + std::to_string(z1.cols()) +
                                " and " + std::to_string(z2.cols()) + " differ");
  }
  return z1 * (1.0 - alpha) + z2 * alpha;
}

std::vector<double> default_alphas(int steps) {
  if (steps < 1) throw std::invalid_argument("default_alphas: steps must be >= 1");
  std::vector<double> out;
  for (int i = 0; i <= steps; ++i) out.push_back(static_cast<double>(i) / steps);
  return out;
}

RougeTriple rouge_all(const Sentence& hypothesis, const Sentence& reference) {
  return {rouge_f1(hypothesis, reference, RougeKind::One),
          rouge_f1(hypothesis, reference, RougeKind::Two),
          rouge_f1(hypothesis, reference, RougeKind::L)};
}

std::vector<RowVector> latent_codes(const SentenceVae& model, std::span<const Sentence> sentences,
                                    LatentSource source, Rng& rng) {
  const Batch batch = make_batch(sentences);
  std::vector<RowVector> out;
  for (const auto& seq : model.posteriors(batch)) {
    const DiagGaussian q = decoder_input_posterior(seq, model.config().combine);
    if (source == LatentSource::PosteriorMean) {
      out.push_back(q.mu);
    } else {
      const RowVector eps = rng.normal_matrix(1, q.mu.cols());
      out.push_back(reparameterize(q.mu, q.log_var, eps));
    }
  }
  return out;
}

namespace {

void check_alphas(std::span<const double> alphas) {
  if (alphas.empty() || alphas.front() != 0.0 || alphas.back() != 1.0) {
    throw std::invalid_argument("interpolation: alpha grid must start at 0 and end at 1");
  }
  if (!std::is_sorted(alphas.begin(), alphas.end())) {
    throw std::invalid_argument("interpolation: alpha grid must be sorted");
  }
}

}  // namespace

InterpolationSweep interpolation_sweep(const SentenceVae& model, const Sentence& first,
                                       const Sentence& second, std::span<const double> alphas,
                                       LatentSource source, Rng& rng, int max_len) {
  check_alphas(alphas);
  const std::vector<Sentence> pair{first, second};
  const auto codes = latent_codes(model, pair, source, rng);

  InterpolationSweep sweep;
  sweep.first = first;
  sweep.second = second;
  sweep.z1 = codes[0];
  sweep.z2 = codes[1];
  Matrix z(static_cast<Eigen::Index>(alphas.size()), sweep.z1.cols());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)) = interpolate_latents(sweep.z1, sweep.z2, alphas[i]);
  }
  const auto decoded = model.generate_greedy(z, max_len);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    InterpolationPoint p;
    p.alpha = alphas[i];
    p.z = z.row(static_cast<Eigen::Index>(i));
    p.decoded = decoded[i];
    p.vs_first = rouge_all(p.decoded, first);
    p.vs_second = rouge_all(p.decoded, second);
    sweep.points.push_back(std::move(p));
  }
  return sweep;
}

std::vector<InterpolationSweep> corpus_sweeps(const SentenceVae& model,
                                              std::span<const Sentence> corpus,
                                              std::span<const double> alphas,
                                              LatentSource source, Rng& rng,
                                              std::size_t max_pairs, int max_len) {
  std::vector<InterpolationSweep> out;
  for (std::size_t i = 0; i + 1 < corpus.size() && out.size() < max_pairs; i += 2) {
    out.push_back(
        interpolation_sweep(model, corpus[i], corpus[i + 1], alphas, source, rng, max_len));
  }
  return out;
}

AlphaCurve mean_curve(std::span<const InterpolationSweep> sweeps) {
  AlphaCurve c;
  if (sweeps.empty()) return c;
  const std::size_t n = sweeps.front().points.size();
  c.vs_first.resize(n);
  c.vs_second.resize(n);
  for (const auto& p : sweeps.front().points) c.alphas.push_back(p.alpha);
  for (const auto& s : sweeps) {
    if (s.points.size() != n) throw std::invalid_argument("mean_curve: sweeps differ in grid");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = s.points[i];
      c.vs_first[i].r1 += p.vs_first.r1;
      c.vs_first[i].r2 += p.vs_first.r2;
      c.vs_first[i].rl += p.vs_first.rl;
      c.vs_second[i].r1 += p.vs_second.r1;
      c.vs_second[i].r2 += p.vs_second.r2;
      c.vs_second[i].rl += p.vs_second.rl;
    }
  }
  const double k = static_cast<double>(sweeps.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (RougeTriple* t : {&c.vs_first[i], &c.vs_second[i]}) {
      t->r1 /= k;
      t->r2 /= k;
      t->rl /= k;
    }
  }
  return c;
}

void write_sweeps_csv(std::span<const InterpolationSweep> sweeps, const Vocab& vocab,
                      const std::filesystem::path& path) {
  CsvWriter csv(path, {"pair_id", "alpha", "decoded_text", "rouge1_ref1", "rouge2_ref1",
                       "rougeL_ref1", "rouge1_ref2", "rouge2_ref2", "rougeL_ref2"});
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    for (const auto& p : sweeps[i].points) {
      csv.row() << i << p.alpha << decode_ids(vocab, p.decoded) << p.vs_first.r1
                << p.vs_first.r2 << p.vs_first.rl << p.vs_second.r1 << p.vs_second.r2
                << p.vs_second.rl;
    }
  }
}

}  // namespace twr
