#include "twr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "twr/csv.hpp"

namespace twr {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) {
    throw std::invalid_argument("train: learning_rate must be >= 0");
  }
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (anneal_cycles < 1) throw std::invalid_argument("train: anneal_cycles must be >= 1");
  if (!(anneal_ramp > 0.0 && anneal_ramp <= 1.0)) {
    throw std::invalid_argument("train: anneal_ramp outside (0, 1]");
  }
}

AdamConfig TrainConfig::adam() const {
  AdamConfig a;
  a.learning_rate = learning_rate;
  a.weight_decay = weight_decay;
  return a;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},   {"recon", r.recon},       {"kl_avg", r.kl_avg},
          {"beta", r.beta},     {"val_elbo", r.val_elbo}, {"wall_seconds", r.wall_seconds}};
}

EpochRecord epoch_record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.recon = j.at("recon").get<double>();
  r.kl_avg = j.at("kl_avg").get<double>();
  r.beta = j.at("beta").get<double>();
  r.val_elbo = j.at("val_elbo").get<double>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

json TrainState::to_json() const {
  json log_rows = json::array();
  for (const auto& r : log) log_rows.push_back(twr::to_json(r));
  return {{"epochs_done", epochs_done},
          {"best_val", std::isfinite(best_val) ? json(best_val) : json(nullptr)},
          {"best_epoch", best_epoch},
          {"log", log_rows}};
}

TrainState TrainState::from_checkpoint(const Checkpoint& cp) {
  TrainState s;
  s.adam = cp.adam;
  const json& t = cp.trainer;
  s.epochs_done = t.value("epochs_done", 0);
  s.best_epoch = t.value("best_epoch", 0);
  if (t.contains("best_val") && !t["best_val"].is_null()) {
    s.best_val = t["best_val"].get<double>();
  }
  if (t.contains("log")) {
    for (const auto& r : t["log"]) s.log.push_back(epoch_record_from_json(r));
  }
  return s;
}

void write_log_csv(const std::vector<EpochRecord>& log, const std::filesystem::path& path) {
  CsvWriter csv(path, {"epoch", "recon", "kl_avg", "beta", "val_elbo"});
  for (const auto& r : log) csv.row() << r.epoch << r.recon << r.kl_avg << r.beta << r.val_elbo;
}

namespace {

Checkpoint snapshot(const TrainingTask& task, const ParameterSet& params,
                    const TrainConfig& config, const TrainState& state) {
  Checkpoint cp;
  cp.config = task.describe();
  cp.config["train_seed"] = config.seed;
  cp.vocab_hash = task.vocab_hash();
  cp.params = params;
  cp.adam = state.adam;
  cp.rng = RngState{derive_seed(config.seed, "sample", static_cast<std::uint64_t>(state.epochs_done)), 0};
  cp.trainer = state.to_json();
  return cp;
}

}  // namespace

void train(TrainingTask& task, const TrainConfig& config, TrainState& state,
           const TrainOptions& options) {
  config.validate();
  ParameterSet& params = task.parameters();
  if (state.adam.first_moment.empty()) state.adam = AdamState::zeros_like(params);
  const AdamConfig adam = config.adam();

  const std::size_t n = task.train_size();
  if (n == 0) throw std::invalid_argument("train: empty training set");
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const long batches_per_epoch = static_cast<long>((n + bs - 1) / bs);
  const long total_steps = batches_per_epoch * config.epochs;
  const int last_epoch = options.stop_after ? std::min(*options.stop_after, config.epochs)
                                            : config.epochs;

  std::optional<std::ofstream> jsonl;
  if (options.output_dir) {
    std::filesystem::create_directories(*options.output_dir);
    jsonl.emplace(*options.output_dir / "train_log.jsonl",
                  state.epochs_done > 0 ? std::ios::app : std::ios::trunc);
  }

  for (int e = state.epochs_done; e < last_epoch; ++e) {
    const auto start = std::chrono::steady_clock::now();
    const auto epoch = static_cast<std::uint64_t>(e);
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    Rng sample_rng(derive_seed(config.seed, "sample", epoch));
    const std::vector<std::size_t> order = shuffled_order(n, shuffle_rng);

    double recon_sum = 0.0;
    double kl_sum = 0.0;
    double beta = 1.0;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t at = static_cast<std::size_t>(b) * bs;
      const std::span<const std::size_t> rows(order.data() + at, std::min(bs, n - at));
      const long step = static_cast<long>(e) * batches_per_epoch + b;
      beta = anneal_weight(config.anneal, step, std::max(1L, total_steps),
                           config.anneal_cycles, config.anneal_ramp);

      Tape tape;
      const std::vector<Var> leaves = params.bind(tape);
      const ElboBreakdown elbo = task.batch_loss(tape, leaves, rows, beta, sample_rng);
      if (!std::isfinite(elbo.objective)) {
        throw TrainingHalted("non-finite training objective at epoch " +
                             std::to_string(e + 1) + ", batch " + std::to_string(b + 1));
      }
      const Gradients grads = tape.backward(elbo.loss);
      std::vector<Matrix> g;
      g.reserve(leaves.size());
      for (Var v : leaves) g.push_back(grads[v]);
      clip_gradients(g, config.clip_norm);
      try {
        adam_step(params, g, state.adam, adam);
      } catch (const std::runtime_error& err) {
        throw TrainingHalted(err.what());
      }
      recon_sum += elbo.recon * static_cast<double>(rows.size());
      kl_sum += elbo.kl_avg * static_cast<double>(rows.size());
    }

    Rng valid_rng(derive_seed(config.seed, "valid", epoch));
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.recon = recon_sum / static_cast<double>(n);
    rec.kl_avg = kl_sum / static_cast<double>(n);
    rec.beta = beta;
    rec.val_elbo = task.validation_objective(config.batch_size, valid_rng);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.val_elbo)) {
      throw TrainingHalted("non-finite validation objective at epoch " + std::to_string(e + 1));
    }

    state.epochs_done = e + 1;
    state.log.push_back(rec);
    const bool improved = rec.val_elbo < state.best_val;
    if (improved) {
      state.best_val = rec.val_elbo;
      state.best_epoch = rec.epoch;
    }

    if (options.output_dir) {
      const Checkpoint cp = snapshot(task, params, config, state);
      save_checkpoint(cp, *options.output_dir / "last");
      if (improved) save_checkpoint(cp, *options.output_dir / "best");
      write_log_csv(state.log, *options.output_dir / "train_log.csv");
      *jsonl << to_json(rec).dump() << '\n';
      jsonl->flush();
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
}

// --- LmTask ------------------------------------------------------------------

LmTask::LmTask(SentenceVae& model, std::span<const Sentence> train,
               std::span<const Sentence> valid, std::uint64_t vocab_hash)
    : model_(model), train_(train), valid_(valid), vocab_hash_(vocab_hash) {}

ElboBreakdown LmTask::batch_loss(Tape& tape, std::span<const Var> leaves,
                                 std::span<const std::size_t> rows, double beta,
                                 Rng& rng) const {
  const Batch batch = make_batch(train_, rows);
  return model_.compute_elbo(tape, model_.bind(leaves), batch, beta, rng);
}

double LmTask::validation_objective(int batch_size, Rng& rng) const {
  return evaluate_objective(model_, valid_, batch_size, rng);
}

json LmTask::describe() const { return {{"kind", "sentence-vae"}, {"model", to_json(model_.config())}}; }

double evaluate_objective(const SentenceVae& model, std::span<const Sentence> data,
                          int batch_size, Rng& rng) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const Batch& batch : make_ordered_batches(data, batch_size)) {
    Tape tape;
    const auto vars = model.bind(tape);
    const ElboBreakdown elbo = model.compute_elbo(tape, vars, batch, 1.0, rng);
    total += elbo.objective * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(data.size());
}

json to_json(const ModelConfig& c) {
  return {{"cell", std::string(to_string(c.cell))},
          {"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"z_dim", c.z_dim},
          {"vocab_size", c.vocab_size},
          {"elbo_variant", std::string(to_string(c.variant))},
          {"combine_mode", std::string(to_string(c.combine))},
          {"reg_fraction", c.reg_fraction},
          {"mc_samples", c.mc_samples}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.cell = parse_cell_family(j.at("cell").get<std::string>());
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.variant = parse_elbo_variant(j.at("elbo_variant").get<std::string>());
  c.combine = parse_combine_mode(j.at("combine_mode").get<std::string>());
  c.reg_fraction = j.at("reg_fraction").get<double>();
  c.mc_samples = j.at("mc_samples").get<int>();
  c.validate();
  return c;
}

}  // namespace twr
