#pragma once

// Run configuration: a JSON document whose sections mirror the library
// structs. Every key is optional and falls back to the defaults below;
// unknown keys are errors. Command-line flags are applied after the file.
//
// {
//   "seed": 1,
//   "output_dir": "",
//   "data":   {"train", "valid", "test", "vocab_size", "min_count", "embeddings"},
//   "model":  {"cell", "embed_dim", "hidden_dim", "z_dim", "elbo_variant",
//              "combine_mode", "reg_fraction", "mc_samples"},
//   "train":  {"learning_rate", "weight_decay", "batch_size", "epochs",
//              "clip_norm", "anneal", "anneal_cycles", "anneal_ramp"},
//   "eval":   {"nll_mode", "iw_samples", "mi_points", "mi_draws", "batch_size"},
//   "interpolation": {"latent_source", "steps", "pairs", "max_len"},
//   "dialogue": {"embed_dim", "hidden_dim", "z_dim", "window", "prior_hidden",
//                "elbo_variant", "learned_prior", "mc_samples", "responses",
//                "max_len", "bow_loss"}
// }
//
// Sub-seeds: derive_seed(seed, "init"), training uses seed itself,
// derive_seed(seed, "eval"), derive_seed(seed, "interpolate"),
// derive_seed(seed, "generate").

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "twr/dialogue.hpp"
#include "twr/interpolation.hpp"
#include "twr/lm_metrics.hpp"
#include "twr/trainer.hpp"
#include "twr/vae.hpp"

namespace twr {

/// Schema violation; the message names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  std::string train;
  std::string valid;
  std::string test;
  int vocab_size = 10000;
  int min_count = 1;
  std::string embeddings;  // optional pretrained vectors, "word v1 ... vd" per line
};

struct InterpolationConfig {
  LatentSource latent_source = LatentSource::PosteriorMean;
  int steps = 10;
  int pairs = 50;
  int max_len = 40;
};

struct DialogueRunConfig {
  DialogueConfig model;
  int responses = 10;
  int max_len = 30;
  bool bow_loss = false;  // accepted for compatibility; must stay false
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir;
  DataConfig data;
  ModelConfig model;  // vocab_size is filled from the vocabulary at run time
  TrainConfig train;
  EvalConfig eval;
  InterpolationConfig interpolation;
  DialogueRunConfig dialogue;

  /// Pushes the top-level seed into the nested structs.
  void propagate_seed();
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the fully resolved configuration (every field present).
void save_run_config(const RunConfig& c, const std::filesystem::path& path);

}  // namespace twr
