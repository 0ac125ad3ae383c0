#pragma once

// Epoch-based optimisation loop shared by the sentence VAE and the dialogue
// model. Everything random is derived from TrainConfig::seed:
//   shuffle order of epoch e   derive_seed(seed, "shuffle", e)
//   training noise of epoch e  derive_seed(seed, "sample", e)
//   validation noise           derive_seed(seed, "valid", e)
// so a run resumed from an epoch-boundary checkpoint replays the remaining
// epochs exactly.

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "twr/checkpoint.hpp"
#include "twr/optim.hpp"
#include "twr/vae.hpp"

namespace twr {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;
  int batch_size = 64;
  int epochs = 10;
  std::uint64_t seed = 1;
  double clip_norm = 0.0;  // <= 0: no clipping
  AnnealSchedule anneal = AnnealSchedule::Constant;
  int anneal_cycles = 4;
  double anneal_ramp = 0.5;

  void validate() const;
  AdamConfig adam() const;
};

struct EpochRecord {
  int epoch = 0;          // 1-based
  double recon = 0.0;     // training mean per sentence
  double kl_avg = 0.0;    // training mean per sentence
  double beta = 1.0;      // weight at the epoch's last step
  double val_elbo = 0.0;  // validation objective with beta = 1
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

/// Resumable optimisation state.
struct TrainState {
  AdamState adam;
  int epochs_done = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<EpochRecord> log;

  nlohmann::json to_json() const;  // everything except the moments
  static TrainState from_checkpoint(const Checkpoint& cp);
};

/// What the loop needs from a model and its data.
class TrainingTask {
 public:
  virtual ~TrainingTask() = default;
  virtual ParameterSet& parameters() = 0;
  virtual std::size_t train_size() const = 0;
  /// Builds the loss for the given training rows on tape, using leaves bound
  /// in ParameterSet order.
  virtual ElboBreakdown batch_loss(Tape& tape, std::span<const Var> leaves,
                                   std::span<const std::size_t> rows, double beta,
                                   Rng& rng) const = 0;
  /// Validation objective (beta = 1), averaged per example.
  virtual double validation_objective(int batch_size, Rng& rng) const = 0;
  virtual nlohmann::json describe() const = 0;
  virtual std::uint64_t vocab_hash() const = 0;
};

struct TrainOptions {
  /// When set, "<dir>/last" is written after every epoch and "<dir>/best"
  /// whenever validation improves; the log is mirrored to <dir>/train_log.csv
  /// and <dir>/train_log.jsonl.
  std::optional<std::filesystem::path> output_dir;
  /// Stop after this many total epochs even if config.epochs is larger.
  std::optional<int> stop_after;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Raised when the training objective becomes non-finite. The last epoch
/// checkpoint on disk is left untouched.
class TrainingHalted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs epochs state.epochs_done + 1 .. config.epochs.
void train(TrainingTask& task, const TrainConfig& config, TrainState& state,
           const TrainOptions& options = {});

/// Rewrites the CSV mirror of a training log (deterministic columns only).
void write_log_csv(const std::vector<EpochRecord>& log, const std::filesystem::path& path);

/// Sentence-VAE task over encoded corpora.
class LmTask : public TrainingTask {
 public:
  LmTask(SentenceVae& model, std::span<const Sentence> train,
         std::span<const Sentence> valid, std::uint64_t vocab_hash);

  ParameterSet& parameters() override { return model_.parameters(); }
  std::size_t train_size() const override { return train_.size(); }
  ElboBreakdown batch_loss(Tape& tape, std::span<const Var> leaves,
                           std::span<const std::size_t> rows, double beta,
                           Rng& rng) const override;
  double validation_objective(int batch_size, Rng& rng) const override;
  nlohmann::json describe() const override;
  std::uint64_t vocab_hash() const override { return vocab_hash_; }

 private:
  SentenceVae& model_;
  std::span<const Sentence> train_;
  std::span<const Sentence> valid_;
  std::uint64_t vocab_hash_;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Validation objective of a sentence VAE at beta = 1.
double evaluate_objective(const SentenceVae& model, std::span<const Sentence> data,
                          int batch_size, Rng& rng);

}  // namespace twr
