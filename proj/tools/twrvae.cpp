// twrvae: train, evaluate and sample sentence VAEs and the dialogue CVAE.
//
// Exit status: 0 success, 1 usage or validation error, 2 runtime failure.
// Output directory: --output, else the config's output_dir, else
// $TWRVAE_OUTPUT_ROOT/<command> (TWRVAE_OUTPUT_ROOT defaults to "runs").

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "twr/config.hpp"
#include "twr/csv.hpp"
#include "twr/gradcheck.hpp"
#include "twr/version.hpp"

namespace fs = std::filesystem;
using namespace twr;

namespace {

/// Validation failures that are not schema errors (missing inputs etc.).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Common {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
};

struct Overrides {
  std::optional<std::string> train, valid, test;
  std::optional<std::string> cell, elbo_variant, combine_mode, anneal;
  std::optional<double> reg_fraction, lr;
  std::optional<int> mc_samples, epochs, batch_size, embed_dim, hidden_dim, z_dim, window;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON run configuration");
  app->add_option("--output", c.output, "output directory");
  app->add_option("--seed", c.seed, "top-level seed");
}

void add_model_overrides(CLI::App* app, Overrides& o) {
  app->add_option("--train", o.train, "training corpus");
  app->add_option("--valid", o.valid, "validation corpus");
  app->add_option("--test", o.test, "test corpus");
  app->add_option("--cell", o.cell, "rnn|gru|lstm");
  app->add_option("--elbo-variant", o.elbo_variant, "twr|basic");
  app->add_option("--combine-mode", o.combine_mode, "final|mean|sum");
  app->add_option("--reg-fraction", o.reg_fraction, "fraction of final steps regularised");
  app->add_option("--anneal", o.anneal, "constant|linear|cyclical");
  app->add_option("--mc-samples", o.mc_samples, "samples per ELBO evaluation");
  app->add_option("--epochs", o.epochs);
  app->add_option("--batch-size", o.batch_size);
  app->add_option("--lr", o.lr, "learning rate");
  app->add_option("--embed-dim", o.embed_dim);
  app->add_option("--hidden-dim", o.hidden_dim);
  app->add_option("--z-dim", o.z_dim);
}

RunConfig resolve(const Common& c, const Overrides& o, bool dialogue) {
  nlohmann::json j = c.config.empty() ? to_json(RunConfig{}) : to_json(load_run_config(c.config));
  if (c.seed) j["seed"] = *c.seed;
  if (!c.output.empty()) j["output_dir"] = c.output;
  if (o.train) j["data"]["train"] = *o.train;
  if (o.valid) j["data"]["valid"] = *o.valid;
  if (o.test) j["data"]["test"] = *o.test;
  const char* section = dialogue ? "dialogue" : "model";
  if (o.cell) j["model"]["cell"] = *o.cell;
  if (o.elbo_variant) j[section]["elbo_variant"] = *o.elbo_variant;
  if (o.combine_mode) j["model"]["combine_mode"] = *o.combine_mode;
  if (o.reg_fraction) j["model"]["reg_fraction"] = *o.reg_fraction;
  if (o.mc_samples) j[section]["mc_samples"] = *o.mc_samples;
  if (o.embed_dim) j[section]["embed_dim"] = *o.embed_dim;
  if (o.hidden_dim) j[section]["hidden_dim"] = *o.hidden_dim;
  if (o.z_dim) j[section]["z_dim"] = *o.z_dim;
  if (o.window) j["dialogue"]["window"] = *o.window;
  if (o.anneal) j["train"]["anneal"] = *o.anneal;
  if (o.epochs) j["train"]["epochs"] = *o.epochs;
  if (o.batch_size) j["train"]["batch_size"] = *o.batch_size;
  if (o.lr) j["train"]["learning_rate"] = *o.lr;
  // Round trip through the parser so flag values get the same validation.
  return run_config_from_json(j);
}

fs::path output_dir(const RunConfig& cfg, const std::string& command) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* root = std::getenv("TWRVAE_OUTPUT_ROOT");
  return fs::path(root != nullptr && *root != '\0' ? root : "runs") / command;
}

std::string require(const std::string& value, const char* key) {
  if (value.empty()) throw UsageError(std::string(key) + " is required (config or flag)");
  return value;
}

// --- sentence VAE ------------------------------------------------------------

struct LoadedModel {
  Checkpoint checkpoint;
  Vocab vocab;
  fs::path dir;
};

fs::path default_vocab(const fs::path& stem) { return stem.parent_path() / "vocab.txt"; }

LoadedModel load_model(const fs::path& stem, const std::string& vocab_path, const char* kind) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(stem);
  m.dir = stem.parent_path();
  m.vocab = load_vocab(vocab_path.empty() ? default_vocab(stem) : fs::path(vocab_path));
  if (m.vocab.hash() != m.checkpoint.vocab_hash) {
    throw std::runtime_error("vocabulary does not match checkpoint " + stem.string());
  }
  if (m.checkpoint.config.value("kind", "") != kind) {
    throw UsageError("checkpoint " + stem.string() + " holds a " +
                     m.checkpoint.config.value("kind", "?") + " model, expected " + kind);
  }
  return m;
}

std::vector<Sentence> read_corpus(const Vocab& vocab, const std::string& path) {
  return encode_corpus(vocab, read_lines(path));
}

int cmd_train(const Common& c, const Overrides& o, bool resume) {
  RunConfig cfg = resolve(c, o, false);
  const fs::path out = output_dir(cfg, "train");
  cfg.output_dir = out.string();
  fs::create_directories(out);

  Vocab vocab;
  TrainState state;
  std::optional<SentenceVae> model;
  if (resume) {
    cfg = load_run_config(out / "config.json");
    // only the epoch budget may change on resume
    if (o.epochs) cfg.train.epochs = *o.epochs;
    vocab = load_vocab(out / "vocab.txt");
    Checkpoint cp = load_checkpoint(out / "last");
    if (cp.vocab_hash != vocab.hash()) throw std::runtime_error("vocabulary changed since checkpoint");
    model.emplace(model_config_from_json(cp.config.at("model")), cp.params);
    state = TrainState::from_checkpoint(cp);
  } else {
    const auto lines = read_lines(require(cfg.data.train, "data.train"));
    vocab = build_vocab(lines, cfg.data.vocab_size, cfg.data.min_count);
    cfg.model.vocab_size = vocab.size();
    Rng init(derive_seed(cfg.seed, "init"));
    model.emplace(cfg.model, init);
    if (!cfg.data.embeddings.empty()) {
      const EmbeddingTable table = load_embeddings(cfg.data.embeddings, vocab, cfg.model.embed_dim, init);
      model->parameters()["embedding"] = table.values;
      std::cerr << "embeddings: " << table.coverage * 100.0 << "% of vocabulary covered\n";
    }
    save_vocab(vocab, out / "vocab.txt");
    save_run_config(cfg, out / "config.json");
  }
  const std::vector<Sentence> train = read_corpus(vocab, cfg.data.train);
  const std::vector<Sentence> valid =
      cfg.data.valid.empty() ? train : read_corpus(vocab, cfg.data.valid);

  LmTask task(*model, train, valid, vocab.hash());
  TrainOptions options;
  options.output_dir = out;
  options.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << "  recon " << format_double(r.recon) << "  kl "
              << format_double(r.kl_avg) << "  val " << format_double(r.val_elbo) << '\n';
  };
  try {
    twr::train(task, cfg.train, state, options);
  } catch (const TrainingHalted& e) {
    std::cerr << "training halted: " << e.what() << " (last good checkpoint kept)\n";
    return 2;
  }
  std::cout << "best epoch " << state.best_epoch << ", outputs in " << out.string() << '\n';
  return 0;
}

int cmd_eval(const Common& c, const Overrides& o, const std::string& checkpoint,
             const std::string& vocab_path, const std::string& data,
             const std::optional<std::string>& nll_mode, const std::optional<int>& iw,
             const std::optional<int>& mi_points, const std::optional<int>& mi_draws) {
  RunConfig cfg = resolve(c, o, false);
  if (nll_mode) cfg.eval.nll.mode = parse_nll_mode(*nll_mode);
  if (iw) cfg.eval.nll.samples = *iw;
  if (mi_points) cfg.eval.mi_points = *mi_points;
  if (mi_draws) cfg.eval.mi_draws = *mi_draws;
  cfg.eval.nll.validate();
  if (cfg.eval.mi_points < 2) throw UsageError("--mi-points must be >= 2");

  LoadedModel m = load_model(require(checkpoint, "--checkpoint"), vocab_path, "sentence-vae");
  const SentenceVae model(model_config_from_json(m.checkpoint.config.at("model")),
                          m.checkpoint.params);
  const std::string path = !data.empty() ? data : require(cfg.data.test, "data.test or --data");
  const auto corpus = read_corpus(m.vocab, path);
  const LmReport r = evaluate(model, corpus, cfg.eval);

  const fs::path out = c.output.empty() ? m.dir : fs::path(c.output);
  fs::create_directories(out);
  write_report_csv({{fs::path(checkpoint).stem().string(), r}}, fs::path(path).filename().string(),
                   out / "report.csv");
  std::cout << "nll " << format_double(r.nll) << " (" << to_string(cfg.eval.nll.mode) << ", "
            << cfg.eval.nll.samples << " samples)\nppl " << format_double(r.ppl) << "\nkl "
            << format_double(r.kl) << "\nmi " << format_double(r.mi) << '\n';
  return 0;
}

int cmd_interpolate(const Common& c, const Overrides& o, const std::string& checkpoint,
                    const std::string& vocab_path, const std::string& data,
                    const std::optional<std::string>& source, const std::optional<int>& pairs) {
  RunConfig cfg = resolve(c, o, false);
  if (source) cfg.interpolation.latent_source = parse_latent_source(*source);
  if (pairs) cfg.interpolation.pairs = *pairs;
  LoadedModel m = load_model(require(checkpoint, "--checkpoint"), vocab_path, "sentence-vae");
  const SentenceVae model(model_config_from_json(m.checkpoint.config.at("model")),
                          m.checkpoint.params);
  const std::string path = !data.empty() ? data : require(cfg.data.test, "data.test or --data");
  const auto corpus = read_corpus(m.vocab, path);
  const auto alphas = default_alphas(cfg.interpolation.steps);
  Rng rng(derive_seed(cfg.seed, "interpolate"));
  const auto sweeps =
      corpus_sweeps(model, corpus, alphas, cfg.interpolation.latent_source, rng,
                    static_cast<std::size_t>(cfg.interpolation.pairs), cfg.interpolation.max_len);

  const fs::path out = c.output.empty() ? m.dir : fs::path(c.output);
  fs::create_directories(out);
  write_sweeps_csv(sweeps, m.vocab, out / "interpolation.csv");
  const AlphaCurve curve = mean_curve(sweeps);
  CsvWriter csv(out / "interpolation_curve.csv",
                {"alpha", "rouge1_ref1", "rouge2_ref1", "rougeL_ref1", "rouge1_ref2",
                 "rouge2_ref2", "rougeL_ref2"});
  for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
    const auto& a = curve.vs_first[i];
    const auto& b = curve.vs_second[i];
    csv.row() << curve.alphas[i] << a.r1 << a.r2 << a.rl << b.r1 << b.r2 << b.rl;
  }
  std::cout << sweeps.size() << " pairs (" << to_string(cfg.interpolation.latent_source)
            << " latents) written to " << (out / "interpolation.csv").string() << '\n';
  return 0;
}

int cmd_generate(const Common& c, const std::string& checkpoint, const std::string& vocab_path,
                 int count, int max_len) {
  if (count < 1) throw UsageError("--count must be >= 1");
  LoadedModel m = load_model(require(checkpoint, "--checkpoint"), vocab_path, "sentence-vae");
  const SentenceVae model(model_config_from_json(m.checkpoint.config.at("model")),
                          m.checkpoint.params);
  Rng rng(derive_seed(c.seed.value_or(1), "generate"));
  const Matrix z = rng.normal_matrix(count, model.config().z_dim);
  const fs::path out = c.output.empty() ? m.dir : fs::path(c.output);
  fs::create_directories(out);
  std::ofstream file(out / "samples.txt");
  for (const auto& s : model.generate_greedy(z, max_len)) {
    const std::string text = decode_ids(m.vocab, s);
    std::cout << text << '\n';
    file << text << '\n';
  }
  return 0;
}

// --- dialogue ----------------------------------------------------------------

std::vector<DialogueExample> read_examples(const Vocab& vocab, const std::string& path, int window) {
  return make_dialogue_examples(read_dialogues(path), vocab, window);
}

int cmd_dialogue_train(const Common& c, const Overrides& o, bool resume) {
  RunConfig cfg = resolve(c, o, true);
  const fs::path out = output_dir(cfg, "dialogue-train");
  cfg.output_dir = out.string();
  fs::create_directories(out);

  Vocab vocab;
  TrainState state;
  std::optional<DialogueModel> model;
  if (resume) {
    cfg = load_run_config(out / "config.json");
    if (o.epochs) cfg.train.epochs = *o.epochs;
    vocab = load_vocab(out / "vocab.txt");
    Checkpoint cp = load_checkpoint(out / "last");
    if (cp.vocab_hash != vocab.hash()) throw std::runtime_error("vocabulary changed since checkpoint");
    model.emplace(dialogue_config_from_json(cp.config.at("model")), cp.params);
    state = TrainState::from_checkpoint(cp);
  } else {
    std::vector<std::string> utterances;
    for (const auto& d : read_dialogues(require(cfg.data.train, "data.train"))) {
      utterances.insert(utterances.end(), d.begin(), d.end());
    }
    vocab = build_vocab(utterances, cfg.data.vocab_size, cfg.data.min_count);
    cfg.dialogue.model.vocab_size = vocab.size();
    Rng init(derive_seed(cfg.seed, "init"));
    model.emplace(cfg.dialogue.model, init);
    if (!cfg.data.embeddings.empty()) {
      model->parameters()["embedding"] =
          load_embeddings(cfg.data.embeddings, vocab, cfg.dialogue.model.embed_dim, init).values;
    }
    save_vocab(vocab, out / "vocab.txt");
    save_run_config(cfg, out / "config.json");
  }
  const int J = model->config().window;
  const auto train = read_examples(vocab, cfg.data.train, J);
  const auto valid = cfg.data.valid.empty() ? train : read_examples(vocab, cfg.data.valid, J);
  if (train.empty()) throw UsageError("no usable dialogues in " + cfg.data.train);

  DialogueTask task(*model, train, valid, vocab.hash());
  TrainOptions options;
  options.output_dir = out;
  options.on_epoch = [](const EpochRecord& r) {
    std::cout << "epoch " << r.epoch << "  recon " << format_double(r.recon) << "  kl "
              << format_double(r.kl_avg) << "  val " << format_double(r.val_elbo) << '\n';
  };
  try {
    twr::train(task, cfg.train, state, options);
  } catch (const TrainingHalted& e) {
    std::cerr << "training halted: " << e.what() << " (last good checkpoint kept)\n";
    return 2;
  }
  std::cout << "best epoch " << state.best_epoch << ", outputs in " << out.string() << '\n';
  return 0;
}

int cmd_dialogue_generate(const Common& c, const Overrides& o, const std::string& checkpoint,
                          const std::string& vocab_path, const std::string& data,
                          const std::optional<int>& responses) {
  RunConfig cfg = resolve(c, o, true);
  if (responses) cfg.dialogue.responses = *responses;
  if (cfg.dialogue.responses < 1) throw UsageError("--responses must be >= 1");
  LoadedModel m = load_model(require(checkpoint, "--checkpoint"), vocab_path, "dialogue-cvae");
  const DialogueModel model(dialogue_config_from_json(m.checkpoint.config.at("model")),
                            m.checkpoint.params);
  const std::string path = !data.empty() ? data : require(cfg.data.test, "data.test or --data");
  const auto examples = read_examples(m.vocab, path, model.config().window);
  if (examples.empty()) throw UsageError("no usable dialogues in " + path);

  Rng rng(derive_seed(cfg.seed, "generate"));
  const DialogueSamples samples =
      sample_all(model, examples, cfg.dialogue.responses, rng, cfg.dialogue.max_len);
  DialogueSamples baseline;
  for (const auto& ex : examples) {
    baseline.responses.emplace_back(static_cast<std::size_t>(cfg.dialogue.responses),
                                    model.greedy_mean_response(ex, cfg.dialogue.max_len));
  }
  Matrix embeddings = model.parameters()["embedding"];
  std::string bow_source = "model_embeddings";
  if (!cfg.data.embeddings.empty()) {
    Rng erng(derive_seed(cfg.seed, "embeddings"));
    embeddings = load_embeddings(cfg.data.embeddings, m.vocab,
                                 static_cast<int>(embeddings.cols()), erng).values;
    bow_source = "file_embeddings";
  }

  const fs::path out = c.output.empty() ? m.dir : fs::path(c.output);
  fs::create_directories(out);
  std::ofstream text(out / "responses.txt");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (const auto& u : examples[i].context) {
      if (!u.empty()) text << "context: " << decode_ids(m.vocab, u) << '\n';
    }
    text << "reference: " << decode_ids(m.vocab, examples[i].response) << '\n';
    for (const auto& r : samples.responses[i]) text << "  sample: " << decode_ids(m.vocab, r) << '\n';
    text << '\n';
  }
  const std::string estimator = "bleu n<=3 add-one; " + bow_source + "; n=" +
                                std::to_string(cfg.dialogue.responses) +
                                " seed=" + std::to_string(cfg.seed);
  const DialogueScores sampled = score_responses(examples, samples, embeddings);
  const DialogueScores greedy = score_responses(examples, baseline, embeddings);
  const std::string dataset = fs::path(path).filename().string();
  write_dialogue_scores_csv(sampled, dataset, "cvae-sampled", estimator,
                            out / "dialogue_scores.csv");
  write_dialogue_scores_csv(greedy, dataset, "greedy-mean", estimator,
                            out / "dialogue_baseline_scores.csv");
  std::cout << "bleu p/r/f1 " << format_double(sampled.bleu.precision) << " "
            << format_double(sampled.bleu.recall) << " " << format_double(sampled.bleu.f1)
            << "\ninter dist-1 " << format_double(sampled.dist.inter_dist1) << " (greedy-mean "
            << format_double(greedy.dist.inter_dist1) << ")\n";
  return 0;
}

// --- grad-check --------------------------------------------------------------

int cmd_grad_check(const Common& c, double tolerance, bool no_dialogue) {
  const std::uint64_t seed = c.seed.value_or(1);
  std::optional<CsvWriter> csv;
  if (!c.output.empty()) {
    fs::create_directories(c.output);
    csv.emplace(fs::path(c.output) / "grad_check.csv",
                std::vector<std::string>{"case", "coordinates", "max_relative_error", "pass"});
  }
  bool all = true;
  std::cout << std::left << std::setw(44) << "case" << std::setw(8) << "coords"
            << std::setw(14) << "max_rel_err" << "result\n";
  for (const auto& gc : default_grad_check_cases(!no_dialogue)) {
    const GradCheckRow row = run_grad_check(gc, seed, tolerance);
    all = all && row.pass;
    std::cout << std::setw(44) << gc.label() << std::setw(8) << row.result.coordinates
              << std::setw(14) << std::scientific << std::setprecision(2)
              << row.result.max_relative_error << std::defaultfloat
              << (row.pass ? "pass" : "FAIL") << '\n';
    if (csv) {
      csv->row() << gc.label() << row.result.coordinates << row.result.max_relative_error
                 << (row.pass ? "pass" : "fail");
    }
  }
  std::cout << (all ? "all cases passed" : "some cases FAILED") << " (tolerance "
            << tolerance << ")\n";
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timestep-wise regularised VAEs for text"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common common;
  Overrides over;
  std::string checkpoint;
  std::string vocab;
  std::string data;
  bool resume = false;

  auto* train = app.add_subcommand("train", "train a sentence VAE");
  add_common(train, common);
  add_model_overrides(train, over);
  train->add_flag("--resume", resume, "continue from <output>/last");

  std::optional<std::string> nll_mode;
  std::optional<int> iw_samples, mi_points, mi_draws;
  auto* eval = app.add_subcommand("eval", "NLL / PPL / KL / MI report");
  add_common(eval, common);
  add_model_overrides(eval, over);
  eval->add_option("--checkpoint", checkpoint, "checkpoint stem")->required();
  eval->add_option("--vocab", vocab, "vocabulary file (default: next to checkpoint)");
  eval->add_option("--data", data, "evaluation corpus");
  eval->add_option("--nll-mode", nll_mode, "elbo_bound|importance_weighted");
  eval->add_option("--iw-samples", iw_samples, "K for importance weighting");
  eval->add_option("--mi-points", mi_points);
  eval->add_option("--mi-draws", mi_draws);

  std::optional<std::string> latent_source;
  std::optional<int> pairs;
  auto* interp = app.add_subcommand("interpolate", "latent interpolation sweeps");
  add_common(interp, common);
  add_model_overrides(interp, over);
  interp->add_option("--checkpoint", checkpoint, "checkpoint stem")->required();
  interp->add_option("--vocab", vocab);
  interp->add_option("--data", data, "sentences, paired consecutively");
  interp->add_option("--latent-source", latent_source, "posterior_mean|sample");
  interp->add_option("--pairs", pairs);

  int count = 10;
  int max_len = 40;
  auto* gen = app.add_subcommand("generate", "sample sentences from the prior");
  add_common(gen, common);
  gen->add_option("--checkpoint", checkpoint, "checkpoint stem")->required();
  gen->add_option("--vocab", vocab);
  gen->add_option("--count", count);
  gen->add_option("--max-len", max_len);

  auto* dtrain = app.add_subcommand("dialogue-train", "train the dialogue CVAE");
  add_common(dtrain, common);
  add_model_overrides(dtrain, over);
  dtrain->add_option("--window", over.window, "context window J");
  dtrain->add_flag("--resume", resume, "continue from <output>/last");

  std::optional<int> responses;
  auto* dgen = app.add_subcommand("dialogue-generate", "sample and score responses");
  add_common(dgen, common);
  add_model_overrides(dgen, over);
  dgen->add_option("--checkpoint", checkpoint, "checkpoint stem")->required();
  dgen->add_option("--vocab", vocab);
  dgen->add_option("--data", data, "test dialogues");
  dgen->add_option("--responses", responses, "samples per context");

  double tolerance = 1e-6;
  bool no_dialogue = false;
  auto* gc = app.add_subcommand("grad-check", "finite-difference certification suite");
  gc->add_option("--seed", common.seed);
  gc->add_option("--output", common.output, "also write grad_check.csv here");
  gc->add_option("--tolerance", tolerance);
  gc->add_flag("--no-dialogue", no_dialogue);

  auto* version = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (version->parsed()) {
      std::cout << "twrvae " << kVersion << '\n';
      return 0;
    }
    if (train->parsed()) return cmd_train(common, over, resume);
    if (eval->parsed()) {
      return cmd_eval(common, over, checkpoint, vocab, data, nll_mode, iw_samples, mi_points,
                      mi_draws);
    }
    if (interp->parsed()) {
      return cmd_interpolate(common, over, checkpoint, vocab, data, latent_source, pairs);
    }
    if (gen->parsed()) return cmd_generate(common, checkpoint, vocab, count, max_len);
    if (dtrain->parsed()) return cmd_dialogue_train(common, over, resume);
    if (dgen->parsed()) return cmd_dialogue_generate(common, over, checkpoint, vocab, data, responses);
    if (gc->parsed()) return cmd_grad_check(common, tolerance, no_dialogue);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
