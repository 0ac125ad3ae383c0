#include "twr/lm_metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "twr/csv.hpp"
#include "twr/gaussian.hpp"

namespace twr {

std::string_view to_string(NllMode m) {
  return m == NllMode::ElboBound ? "elbo_bound" : "importance_weighted";
}

NllMode parse_nll_mode(std::string_view s) {
  if (s == "elbo_bound") return NllMode::ElboBound;
  if (s == "importance_weighted") return NllMode::ImportanceWeighted;
  throw std::invalid_argument("unknown nll mode '" + std::string(s) +
                              "' (expected elbo_bound or importance_weighted)");
}

void NllEstimator::validate() const {
  if (samples < 1) {
    throw std::invalid_argument(std::string(to_string(mode)) + ": samples must be >= 1, got " +
                                std::to_string(samples));
  }
}

double perplexity(double total_nll, long tokens) {
  if (tokens < 1) throw std::invalid_argument("perplexity: no predicted tokens");
  return std::exp(total_nll / static_cast<double>(tokens));
}

namespace {

std::vector<DiagGaussian> batch_posteriors(const SentenceVae& model, const Batch& batch) {
  std::vector<DiagGaussian> out;
  for (const auto& seq : model.posteriors(batch)) {
    out.push_back(decoder_input_posterior(seq, model.config().combine));
  }
  return out;
}

}  // namespace

NllEstimate estimate_nll_ppl(const SentenceVae& model, std::span<const Sentence> corpus,
                             const NllEstimator& estimator, Rng& rng, int batch_size) {
  estimator.validate();
  if (corpus.empty()) throw std::invalid_argument("estimate_nll_ppl: empty corpus");
  const int K = estimator.samples;
  const int Z = model.config().z_dim;

  NllEstimate out;
  double total = 0.0;
  for (const Batch& batch : make_ordered_batches(corpus, batch_size)) {
    const auto B = batch.size();
    const std::vector<DiagGaussian> q = batch_posteriors(model, batch);
    Matrix mu(B, Z);
    Matrix lv(B, Z);
    for (Eigen::Index b = 0; b < B; ++b) {
      mu.row(b) = q[static_cast<std::size_t>(b)].mu;
      lv.row(b) = q[static_cast<std::size_t>(b)].log_var;
    }

    // log_w(b, k) for importance weighting, log p(x|z) for the bound
    Matrix log_w(B, K);
    for (int k = 0; k < K; ++k) {
      const Matrix eps = rng.normal_matrix(B, Z);
      const Matrix z = reparameterize(mu, lv, eps);
      const Vector ll = model.log_likelihood(batch, z);
      for (Eigen::Index b = 0; b < B; ++b) {
        double w = ll(b);
        if (estimator.mode == NllMode::ImportanceWeighted) {
          w += log_standard_normal_density(z.row(b)) -
               log_normal_density(z.row(b), mu.row(b), lv.row(b));
        }
        log_w(b, k) = w;
      }
    }

    for (Eigen::Index b = 0; b < B; ++b) {
      double nll = 0.0;
      if (estimator.mode == NllMode::ImportanceWeighted) {
        const RowVector row = log_w.row(b);
        nll = -(log_sum_exp(std::span<const double>(row.data(), static_cast<std::size_t>(K))) -
                std::log(static_cast<double>(K)));
      } else {
        nll = -log_w.row(b).mean() + kl_standard_normal(mu.row(b), lv.row(b));
      }
      out.per_sentence.push_back(nll);
      total += nll;
      out.tokens += batch.lengths[static_cast<std::size_t>(b)] + 1;
    }
  }
  out.nll = total / static_cast<double>(corpus.size());
  out.ppl = perplexity(total, out.tokens);
  return out;
}

MiEstimate mutual_information(std::span<const DiagGaussian> posteriors, int draws, Rng& rng) {
  const auto N = static_cast<Eigen::Index>(posteriors.size());
  if (N < 2) throw std::invalid_argument("mutual_information: need at least 2 posteriors");
  if (draws < 1) throw std::invalid_argument("mutual_information: draws must be >= 1");
  const Eigen::Index Z = posteriors.front().mu.cols();

  Matrix mu(N, Z);
  Matrix lv(N, Z);
  MiEstimate out;
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto& q = posteriors[static_cast<std::size_t>(n)];
    if (q.mu.cols() != Z || q.log_var.cols() != Z) {
      throw std::invalid_argument("mutual_information: posteriors differ in dimension");
    }
    mu.row(n) = q.mu;
    lv.row(n) = q.log_var;
    out.mean_kl += kl_standard_normal(q.mu, q.log_var);
  }
  out.mean_kl /= static_cast<double>(N);

  // log N(z; mu_m, var_m) for all m at once
  const Matrix inv_var = (-lv.array()).exp().matrix();
  const Vector log_norm =
      -0.5 * (lv.rowwise().sum().array() + static_cast<double>(Z) * std::log(2.0 * std::numbers::pi));
  std::vector<double> log_q(static_cast<std::size_t>(N));
  double sum = 0.0;
  double sum_sq = 0.0;
  const double log_n = std::log(static_cast<double>(N));
  for (Eigen::Index n = 0; n < N; ++n) {
    for (int s = 0; s < draws; ++s) {
      const RowVector eps = rng.normal_matrix(1, Z);
      const RowVector z = reparameterize(mu.row(n), lv.row(n), eps);
      const Matrix diff = (-mu).rowwise() + z;
      const Vector quad = (diff.array().square() * inv_var.array()).rowwise().sum();
      for (Eigen::Index m = 0; m < N; ++m) {
        log_q[static_cast<std::size_t>(m)] = log_norm(m) - 0.5 * quad(m);
      }
      const double term = log_sum_exp(std::span<const double>(log_q)) - log_n -
                          log_standard_normal_density(z);
      sum += term;
      sum_sq += term * term;
    }
  }
  const double count = static_cast<double>(N) * draws;
  out.aggregate_kl = sum / count;
  const double var = std::max(0.0, sum_sq / count - out.aggregate_kl * out.aggregate_kl);
  out.std_error = std::sqrt(var / count);
  out.mi = out.mean_kl - out.aggregate_kl;
  return out;
}

std::vector<DiagGaussian> sample_posteriors(const SentenceVae& model,
                                            std::span<const Sentence> corpus, int points,
                                            Rng& rng, int batch_size) {
  if (points < 1) throw std::invalid_argument("sample_posteriors: points must be >= 1");
  std::vector<std::size_t> order = shuffled_order(corpus.size(), rng);
  order.resize(std::min(order.size(), static_cast<std::size_t>(points)));
  std::vector<DiagGaussian> out;
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(order.size() - at, static_cast<std::size_t>(batch_size));
    const Batch batch = make_batch(corpus, std::span(order).subspan(at, n));
    for (auto& g : batch_posteriors(model, batch)) out.push_back(std::move(g));
  }
  return out;
}

MiEstimate mutual_information(const SentenceVae& model, std::span<const Sentence> corpus,
                              int points, int draws, Rng& rng) {
  const auto q = sample_posteriors(model, corpus, points, rng);
  return mutual_information(q, draws, rng);
}

LmReport evaluate(const SentenceVae& model, std::span<const Sentence> corpus,
                  const EvalConfig& config) {
  LmReport r;
  r.config = config;
  r.sentences = corpus.size();

  Rng nll_rng(derive_seed(config.seed, "nll"));
  const NllEstimate nll = estimate_nll_ppl(model, corpus, config.nll, nll_rng, config.batch_size);
  r.nll = nll.nll;
  r.ppl = nll.ppl;
  r.tokens = nll.tokens;

  Rng kl_rng(derive_seed(config.seed, "kl"));
  double kl = 0.0;
  double kl_dec = 0.0;
  for (const Batch& batch : make_ordered_batches(corpus, config.batch_size)) {
    Tape tape;
    const ElboBreakdown e = model.compute_elbo(tape, model.bind(tape), batch, 1.0, kl_rng);
    for (double v : e.kl_rows) kl += v;
    for (const auto& q : batch_posteriors(model, batch)) {
      kl_dec += kl_standard_normal(q.mu, q.log_var);
    }
  }
  r.kl = kl / static_cast<double>(corpus.size());
  r.kl_decoder_input = kl_dec / static_cast<double>(corpus.size());

  Rng mi_rng(derive_seed(config.seed, "mi"));
  const MiEstimate mi =
      mutual_information(model, corpus, config.mi_points, config.mi_draws, mi_rng);
  r.mi = mi.mi;
  r.mi_std_error = mi.std_error;
  return r;
}

void write_report_csv(const std::vector<std::pair<std::string, LmReport>>& rows,
                      const std::string& dataset, const std::filesystem::path& path) {
  CsvWriter csv(path, {"dataset", "model", "metric", "value", "estimator"});
  for (const auto& [name, r] : rows) {
    const std::string nll_est = std::string(to_string(r.config.nll.mode)) +
                                " samples=" + std::to_string(r.config.nll.samples) +
                                " seed=" + std::to_string(r.config.seed);
    const std::string mi_est = "aggregate_mc points=" + std::to_string(r.config.mi_points) +
                               " draws=" + std::to_string(r.config.mi_draws) +
                               " seed=" + std::to_string(r.config.seed);
    csv.row() << dataset << name << "nll" << r.nll << nll_est;
    csv.row() << dataset << name << "ppl" << r.ppl << nll_est;
    csv.row() << dataset << name << "kl" << r.kl << "closed_form";
    csv.row() << dataset << name << "kl_decoder_input" << r.kl_decoder_input << "closed_form";
    csv.row() << dataset << name << "mi" << r.mi << mi_est;
    csv.row() << dataset << name << "mi_std_error" << r.mi_std_error << mi_est;
  }
}

}  // namespace twr
