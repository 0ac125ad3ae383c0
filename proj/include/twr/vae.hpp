#pragma once

// Sentence VAE with timestep-wise Gaussian posteriors.
//
// Encoder: a recurrent cell over the content embeddings x^1..x^T. Each hidden
// state h^t goes through two affine heads giving mu^t and log sigma^2 (t).
// Every step samples z^t = mu^t + exp(log_var^t / 2) * eps^t.
//
// Decoder input z is z^T (final), the mean of z^1..z^T (mean) or their sum
// (sum). z is projected affinely to the decoder's initial hidden (and cell)
// state and is not re-fed at later steps. The decoder reads [bos, x^1..x^T]
// and predicts [x^1..x^T, eos].
//
// Loss form (minimised):  recon + beta * kl_avg
//   recon   per-sentence token cross-entropy summed over targets, batch mean
//   kl_avg  basic: KL of the final-step posterior
//           twr:   mean KL over the last ceil(rho * T) steps of each sentence,
//                  using that sentence's own T, then batch mean

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "twr/autodiff.hpp"
#include "twr/cells.hpp"
#include "twr/corpus.hpp"
#include "twr/params.hpp"
#include "twr/rng.hpp"

namespace twr {

enum class ElboVariant { Basic, Twr };
enum class CombineMode { Final, Mean, Sum };
enum class AnnealSchedule { Constant, Linear, Cyclical };

std::string_view to_string(ElboVariant v);
std::string_view to_string(CombineMode m);
std::string_view to_string(AnnealSchedule s);
ElboVariant parse_elbo_variant(std::string_view s);
CombineMode parse_combine_mode(std::string_view s);
AnnealSchedule parse_anneal_schedule(std::string_view s);

struct ModelConfig {
  CellFamily cell = CellFamily::Lstm;
  int embed_dim = 512;
  int hidden_dim = 256;
  int z_dim = 32;
  int vocab_size = 0;
  ElboVariant variant = ElboVariant::Twr;
  CombineMode combine = CombineMode::Final;
  double reg_fraction = 1.0;  // rho in (0, 1]
  int mc_samples = 1;

  void validate() const;
};

/// Number of trailing steps regularised for a sentence of length T.
/// Always at least one, so the final step is included.
int regularised_steps(ElboVariant variant, double reg_fraction, int length);

/// Per-sentence Gaussian posterior parameters, one row per step.
struct PosteriorSequence {
  Matrix mu;       // T x z_dim
  Matrix log_var;  // T x z_dim

  int length() const { return static_cast<int>(mu.rows()); }
};

/// Diagonal Gaussian over a single latent vector.
struct DiagGaussian {
  RowVector mu;
  RowVector log_var;
};

/// Distribution of the decoder input implied by the per-step posteriors:
/// final -> step T; mean -> N(mean mu, sum sigma^2 / T^2); sum -> N(sum mu,
/// sum sigma^2). Steps are sampled independently, so the result is exact.
DiagGaussian decoder_input_posterior(const PosteriorSequence& posterior,
                                     CombineMode mode);

/// Combine sampled or mean latents (T x z_dim) into the decoder input.
RowVector combine_latents(const Matrix& z, CombineMode mode);

// --- tape-level building blocks -------------------------------------------

struct PosteriorHead {
  Var mu_weights;       // hidden x z
  Var mu_bias;          // 1 x z
  Var log_var_weights;  // hidden x z
  Var log_var_bias;     // 1 x z
};

struct GaussianVars {
  Var mu;
  Var log_var;
};

/// Two affine maps of h (rows x hidden).
GaussianVars posterior_params(Tape& tape, const PosteriorHead& head, Var h);

/// mu + exp(log_var / 2) * eps with eps recorded as a constant.
Var reparameterize(Tape& tape, Var mu, Var log_var, const Matrix& eps);

/// Row-wise KL to N(0, I): 0.5 * sum(mu^2 + exp(lv) - 1 - lv). Output rows x 1.
Var kl_standard_normal(Tape& tape, Var mu, Var log_var);

/// Row-wise KL(N(mu_q, lv_q) || N(mu_p, lv_p)). Output rows x 1.
Var kl_diag_gaussians(Tape& tape, Var mu_q, Var lv_q, Var mu_p, Var lv_p);

struct DecoderVars {
  Var embedding;
  CellVars cell;
  Var output_weights;  // hidden x vocab
  Var output_bias;     // 1 x vocab
};

/// Per-row summed cross-entropy of [x^1..x^T, eos] given the decoder's initial
/// state. Output batch x 1. Pad positions carry zero weight.
Var decoder_nll(Tape& tape, const DecoderVars& decoder, const CellState& initial,
                const Batch& batch);

/// Greedy decoding from bos for every row of the initial state. Stops a row at
/// eos or max_len tokens. Returned sequences exclude eos.
std::vector<Sentence> greedy_decode(Tape& tape, const DecoderVars& decoder,
                                    const CellState& initial, int max_len);

/// Linear annealing weight schedules for the KL term.
///   constant  -> 1
///   linear    -> min(1, step / (ramp_fraction * total_steps))
///   cyclical  -> total_steps split into `cycles` equal periods; within each
///                period a linear ramp to 1 over ramp_fraction of the period,
///                then held at 1
double anneal_weight(AnnealSchedule schedule, long step, long total_steps,
                     int cycles = 4, double ramp_fraction = 0.5);

struct ElboBreakdown {
  double recon = 0.0;
  std::vector<double> kl_per_step;  // mean over sentences that reach step t
  double kl_avg = 0.0;
  double beta = 1.0;
  double objective = 0.0;

  std::vector<double> recon_rows;   // per sentence, averaged over samples
  std::vector<double> kl_rows;      // per sentence kl_avg

  Var loss;  // objective on the tape
};

class SentenceVae {
 public:
  SentenceVae(ModelConfig config, Rng& init_rng);
  SentenceVae(ModelConfig config, ParameterSet params);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  struct Bound {
    std::vector<Var> leaves;
    Var embedding;
    CellVars encoder;
    PosteriorHead head;
    Var init_h_weights, init_h_bias;
    Var init_c_weights, init_c_bias;  // lstm only
    DecoderVars decoder;
  };
  /// Registers every parameter as a leaf, in ParameterSet order.
  Bound bind(Tape& tape) const;
  /// Same layout over caller-provided leaves (used by gradient checks).
  Bound bind(std::span<const Var> leaves) const;

  /// Per-step posteriors of every row, stacked t-major: row t*B + b.
  GaussianVars encode(Tape& tape, const Bound& vars, const Batch& batch) const;

  CellState decoder_initial_state(Tape& tape, const Bound& vars, Var z) const;

  ElboBreakdown compute_elbo(Tape& tape, const Bound& vars, const Batch& batch,
                             double beta, Rng& rng) const;

  // --- value-level helpers (fresh tape each call) ---

  std::vector<PosteriorSequence> posteriors(const Batch& batch) const;
  /// log p(x_b | z_b) for every row of batch and of z (batch x z_dim).
  Vector log_likelihood(const Batch& batch, const Matrix& z) const;
  Sentence generate_greedy(const RowVector& z, int max_len) const;
  std::vector<Sentence> generate_greedy(const Matrix& z, int max_len) const;

 private:
  void build(Rng& rng);

  ModelConfig config_;
  ParameterSet params_;
};

}  // namespace twr
