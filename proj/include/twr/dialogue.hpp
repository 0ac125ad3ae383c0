#pragma once

// Conditional VAE for response generation with a latent per context position.
//
// Every utterance (context and response) is read by a bidirectional GRU; its
// summary is [forward state at the last token | backward state at the first
// token], and an empty utterance summarises to zeros. A GRU over the J
// utterance summaries yields context states c^1..c^J.
//
// At each position j:
//   recognition  q(z^j | x, c) = affine([response summary, c^j]) -> (mu, log_var)
//   prior        p(z^j | c)    = affine(tanh(affine(c^j)))        -> (mu, log_var)
// The decoder GRU starts from affine([z^J, c^J]) and reads [bos, x].
//
// Loss (minimised): recon + beta * kl_avg, where kl_avg is the mean
// KL(q || p) over the context's real (non-padding) positions, averaged over
// the batch. The basic variant keeps only position J. Each MC sample draws one
// normal_matrix(batch, z_dim) for z^J.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "twr/text_metrics.hpp"
#include "twr/trainer.hpp"
#include "twr/vae.hpp"

namespace twr {

struct DialogueConfig {
  int embed_dim = 200;
  int hidden_dim = 300;  // utterance GRU (per direction), context GRU, decoder
  int z_dim = 200;
  int vocab_size = 0;
  int window = 10;       // J
  int prior_hidden = 0;  // 0: max(2 * z_dim, 100)
  ElboVariant variant = ElboVariant::Twr;
  bool learned_prior = true;  // false: N(0, I) at every position
  int mc_samples = 1;
  double net_init_scale = 0.02;  // recognition and prior networks

  void validate() const;
  int resolved_prior_hidden() const;
};

nlohmann::json to_json(const DialogueConfig& c);
DialogueConfig dialogue_config_from_json(const nlohmann::json& j);

struct DialogueExample {
  std::vector<Sentence> context;  // exactly `window` entries, left-padded with {}
  Sentence response;
  int turns = 0;                  // real context utterances

  int first_real() const { return static_cast<int>(context.size()) - turns; }
};

/// Builds one example per dialogue: the last utterance is the response and
/// up to `window` preceding utterances form the context. Dialogues with fewer
/// than two utterances, an empty response or an all-empty context are skipped.
std::vector<DialogueExample> make_dialogue_examples(
    const std::vector<std::vector<std::string>>& dialogues, const Vocab& vocab, int window);

/// Left-pads (or truncates from the left) a context to `window` utterances.
DialogueExample make_dialogue_example(std::span<const Sentence> context, Sentence response,
                                      int window);

/// Row-wise KL(q || p) between diagonal Gaussians on the tape. Output rows x 1.
inline Var kl_prior_recognition(Tape& tape, Var mu_q, Var lv_q, Var mu_p, Var lv_p) {
  return kl_diag_gaussians(tape, mu_q, lv_q, mu_p, lv_p);
}

class DialogueModel {
 public:
  DialogueModel(DialogueConfig config, Rng& init_rng);
  DialogueModel(DialogueConfig config, ParameterSet params);

  const DialogueConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  struct Bound {
    std::vector<Var> leaves;
    Var embedding;
    CellVars utterance_fwd, utterance_bwd, context;
    Var recognition_weights, recognition_bias;
    Var prior_w1, prior_b1, prior_w2, prior_b2;
    Var init_weights, init_bias;
    DecoderVars decoder;
  };
  Bound bind(Tape& tape) const;
  Bound bind(std::span<const Var> leaves) const;

  /// Summaries of a batch of utterances, batch x 2*hidden; zero rows for
  /// empty utterances.
  Var encode_utterances(Tape& tape, const Bound& vars, std::span<const Sentence> utterances) const;

  /// Context states c^1..c^J, each batch x hidden.
  std::vector<Var> encode_context(Tape& tape, const Bound& vars,
                                  std::span<const DialogueExample> examples) const;

  /// Prior parameters for rows of context states.
  GaussianVars prior(Tape& tape, const Bound& vars, Var context_state) const;
  GaussianVars recognition(Tape& tape, const Bound& vars, Var response_summary,
                           Var context_state) const;
  CellState decoder_initial_state(Tape& tape, const Bound& vars, Var z, Var context_state) const;

  ElboBreakdown compute_elbo(Tape& tape, const Bound& vars,
                             std::span<const DialogueExample> examples, double beta,
                             Rng& rng) const;

  // --- value-level helpers ---

  /// c^1..c^J of a single context as rows of a J x hidden matrix.
  Matrix context_states(const DialogueExample& example) const;
  /// n responses, each greedily decoded from its own prior draw at position J.
  std::vector<Sentence> sample_responses(const DialogueExample& example, int n, Rng& rng,
                                         int max_len = 30) const;
  /// Greedy decoding from the prior mean at position J.
  Sentence greedy_mean_response(const DialogueExample& example, int max_len = 30) const;

 private:
  void build(Rng& rng);

  DialogueConfig config_;
  ParameterSet params_;
};

class DialogueTask : public TrainingTask {
 public:
  DialogueTask(DialogueModel& model, std::span<const DialogueExample> train,
               std::span<const DialogueExample> valid, std::uint64_t vocab_hash);

  ParameterSet& parameters() override { return model_.parameters(); }
  std::size_t train_size() const override { return train_.size(); }
  ElboBreakdown batch_loss(Tape& tape, std::span<const Var> leaves,
                           std::span<const std::size_t> rows, double beta,
                           Rng& rng) const override;
  double validation_objective(int batch_size, Rng& rng) const override;
  nlohmann::json describe() const override;
  std::uint64_t vocab_hash() const override { return vocab_hash_; }

 private:
  DialogueModel& model_;
  std::span<const DialogueExample> train_;
  std::span<const DialogueExample> valid_;
  std::uint64_t vocab_hash_;
};

/// Per-example validation objective at beta = 1.
double evaluate_dialogue_objective(const DialogueModel& model,
                                   std::span<const DialogueExample> data, int batch_size,
                                   Rng& rng);

/// Mean per-position KL over real positions (beta-free diagnostic).
double mean_position_kl(const DialogueModel& model, std::span<const DialogueExample> data,
                        int batch_size, Rng& rng);

struct DialogueScores {
  BleuScores bleu;
  BowScores bow;  // each response vs the reference, averaged
  DistScores dist;
  std::size_t contexts = 0;
  int responses_per_context = 0;
};

struct DialogueSamples {
  std::vector<std::vector<Sentence>> responses;  // per example
};

DialogueSamples sample_all(const DialogueModel& model, std::span<const DialogueExample> data,
                           int n, Rng& rng, int max_len = 30);

/// Scores sampled responses against each example's reference. BOW similarity
/// uses `embeddings` (vocab x dim).
DialogueScores score_responses(std::span<const DialogueExample> data,
                               const DialogueSamples& samples, const Matrix& embeddings);

/// dataset, model, metric, value, estimator
void write_dialogue_scores_csv(const DialogueScores& scores, const std::string& dataset,
                               const std::string& model_name, const std::string& estimator,
                               const std::filesystem::path& path);

}  // namespace twr
