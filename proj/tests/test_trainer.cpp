#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "twr/checkpoint.hpp"
#include "twr/synthetic.hpp"
#include "twr/trainer.hpp"

using namespace twr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "twrvae_test_trainer" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ParameterSet two_params() {
  ParameterSet p;
  p.add("a", (Matrix(1, 2) << 0.5, -1.0).finished());
  p.add("b", Matrix::Constant(2, 1, 2.0));
  return p;
}

struct ToyData {
  Vocab vocab;
  std::vector<Sentence> train, valid;
};

ToyData toy_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto lines = templated_corpus(n + n / 4, rng);
  ToyData d{build_vocab(std::span(lines).first(n), 100), {}, {}};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    (i < n ? d.train : d.valid).push_back(encode_tokens(d.vocab, lines[i]));
  }
  return d;
}

ModelConfig small_model(int vocab) {
  ModelConfig c;
  c.cell = CellFamily::Gru;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.z_dim = 4;
  c.vocab_size = vocab;
  return c;
}

TrainConfig quick(int epochs) {
  TrainConfig t;
  t.learning_rate = 0.01;
  t.batch_size = 16;
  t.epochs = epochs;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("adam: zero gradient with no decay leaves parameters unchanged") {
  ParameterSet p = two_params();
  AdamState s = AdamState::zeros_like(p);
  AdamConfig c;
  c.weight_decay = 0.0;
  c.learning_rate = 0.1;
  const std::vector<Matrix> g = {Matrix::Zero(1, 2), Matrix::Zero(2, 1)};
  adam_step(p, g, s, c);
  CHECK(p["a"] == two_params()["a"]);
  CHECK(s.step == 1);
}

TEST_CASE("adam: first step moves each coordinate by about lr against its gradient sign") {
  ParameterSet p = two_params();
  AdamState s = AdamState::zeros_like(p);
  AdamConfig c;
  c.weight_decay = 0.0;
  c.learning_rate = 0.01;
  const std::vector<Matrix> g = {(Matrix(1, 2) << 3.0, -0.2).finished(),
                                 (Matrix(2, 1) << -7.0, 1e-3).finished()};
  adam_step(p, g, s, c);
  CHECK(p["a"](0, 0) == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
  CHECK(p["a"](0, 1) == doctest::Approx(-1.0 + 0.01).epsilon(1e-6));
  CHECK(p["b"](0, 0) == doctest::Approx(2.0 + 0.01).epsilon(1e-6));
  CHECK(p["b"](1, 0) == doctest::Approx(2.0 - 0.01).epsilon(1e-4));
}

TEST_CASE("adam: two steps against a scalar recomputation") {
  ParameterSet p;
  p.add("w", Matrix::Constant(1, 1, 0.8));
  AdamState s = AdamState::zeros_like(p);
  AdamConfig c;
  c.learning_rate = 0.05;
  c.weight_decay = 0.01;
  double w = 0.8, m = 0.0, v = 0.0;
  const double grads[2] = {0.3, -1.1};
  for (int k = 0; k < 2; ++k) {
    adam_step(p, std::vector<Matrix>{Matrix::Constant(1, 1, grads[k])}, s, c);
    const double g = grads[k] + 0.01 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, k + 1));
    const double vh = v / (1 - std::pow(0.999, k + 1));
    w -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(std::abs(p["w"](0, 0) - w) < 1e-12);
  }
}

TEST_CASE("adam rejects non-finite gradients and names the parameter") {
  ParameterSet p = two_params();
  AdamState s = AdamState::zeros_like(p);
  std::vector<Matrix> g = {Matrix::Zero(1, 2), Matrix::Zero(2, 1)};
  g[1](1, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(adam_step(p, g, s, AdamConfig{}), doctest::Contains("b"), std::runtime_error);
  CHECK(p["b"] == two_params()["b"]);
  CHECK(s.step == 0);
}

TEST_CASE("gradient clipping") {
  std::vector<Matrix> g = {Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 4.0)};
  CHECK(clip_gradients(g, 10.0) == 1.0);
  CHECK(g[0](0, 0) == 3.0);
  CHECK(clip_gradients(g, 0.0) == 1.0);
  CHECK(clip_gradients(g, 1.0) == doctest::Approx(0.2));
  CHECK(g[1](0, 0) == doctest::Approx(0.8));
}

TEST_CASE("training with learning rate zero keeps parameters bitwise") {
  const ToyData d = toy_data(64, 1);
  Rng init(2);
  TrainConfig t = quick(2);
  t.learning_rate = 0.0;
  t.weight_decay = 0.0;
  SentenceVae model(small_model(d.vocab.size()), init);
  const ParameterSet before = model.parameters();
  LmTask task(model, d.train, d.valid, d.vocab.hash());
  TrainState state;
  state.adam = AdamState::zeros_like(model.parameters());
  train(task, t, state);
  CHECK(state.log.size() == 2);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.parameters()[i] == before[i]);
}

TEST_CASE("same seed gives the same log; resuming equals an uninterrupted run") {
  const ToyData d = toy_data(96, 3);
  auto fresh = [&] {
    Rng init(4);
    return SentenceVae(small_model(d.vocab.size()), init);
  };
  const TrainConfig cfg = quick(4);

  SentenceVae full = fresh();
  LmTask full_task(full, d.train, d.valid, d.vocab.hash());
  TrainState full_state;
  full_state.adam = AdamState::zeros_like(full.parameters());
  train(full_task, cfg, full_state);

  SentenceVae again = fresh();
  LmTask again_task(again, d.train, d.valid, d.vocab.hash());
  TrainState again_state;
  again_state.adam = AdamState::zeros_like(again.parameters());
  train(again_task, cfg, again_state);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(full_state.log[e].recon == again_state.log[e].recon);
    CHECK(full_state.log[e].val_elbo == again_state.log[e].val_elbo);
  }

  const fs::path dir = scratch("resume");
  SentenceVae part = fresh();
  LmTask part_task(part, d.train, d.valid, d.vocab.hash());
  TrainState part_state;
  part_state.adam = AdamState::zeros_like(part.parameters());
  TrainOptions opt;
  opt.output_dir = dir;
  opt.stop_after = 2;
  train(part_task, cfg, part_state, opt);
  REQUIRE(part_state.epochs_done == 2);
  CHECK(fs::exists(dir / "train_log.csv"));

  const Checkpoint cp = load_checkpoint(dir / "last");
  SentenceVae resumed(model_config_from_json(cp.config.at("model")), cp.params);
  TrainState resumed_state = TrainState::from_checkpoint(cp);
  LmTask resumed_task(resumed, d.train, d.valid, d.vocab.hash());
  train(resumed_task, cfg, resumed_state);
  REQUIRE(resumed_state.log.size() == 4);
  for (std::size_t i = 0; i < full.parameters().size(); ++i) {
    CHECK(resumed.parameters()[i] == full.parameters()[i]);
  }
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(resumed_state.log[e].recon == full_state.log[e].recon);
    CHECK(resumed_state.log[e].kl_avg == full_state.log[e].kl_avg);
    CHECK(resumed_state.log[e].val_elbo == full_state.log[e].val_elbo);
  }
  CHECK(resumed_state.best_epoch == full_state.best_epoch);
}

TEST_CASE("checkpoint round trip and corruption") {
  Checkpoint cp;
  cp.config = {{"model", "x"}};
  cp.vocab_hash = 0xfeedbeefULL;
  cp.params = two_params();
  cp.adam = AdamState::zeros_like(cp.params);
  cp.adam.first_moment[0](0, 1) = 0.125;
  cp.adam.step = 9;
  Rng r(3);
  r.normal();
  cp.rng = r.state();
  cp.trainer = {{"epochs_done", 2}};
  const fs::path dir = scratch("ckpt");

  save_checkpoint(cp, dir / "a");
  const Checkpoint back = load_checkpoint(dir / "a");
  CHECK(back.vocab_hash == cp.vocab_hash);
  CHECK(back.params["a"] == cp.params["a"]);
  CHECK(back.params.name(1) == "b");
  CHECK(back.adam.first_moment[0](0, 1) == 0.125);
  CHECK(back.adam.step == 9);
  CHECK(back.rng == cp.rng);
  CHECK(back.trainer == cp.trainer);

  cp.params["a"](0, 0) = 0.1;
  save_checkpoint(cp, dir / "f", StoragePrecision::F32);
  CHECK(load_checkpoint(dir / "f").params["a"](0, 0) == static_cast<double>(0.1f));

  fs::resize_file(blob_path(dir / "a"), fs::file_size(blob_path(dir / "a")) - 8);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "a"), doctest::Contains("bytes"), std::runtime_error);

  save_checkpoint(cp, dir / "v");
  std::ifstream in(manifest_path(dir / "v"));
  nlohmann::json m = nlohmann::json::parse(in);
  in.close();
  m["version"] = 99;
  std::ofstream(manifest_path(dir / "v")) << m.dump();
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "v"), doctest::Contains("99"), std::runtime_error);
}

TEST_CASE("a short run lowers the validation objective") {
  const ToyData d = toy_data(200, 9);
  Rng init(1);
  SentenceVae model(small_model(d.vocab.size()), init);
  LmTask task(model, d.train, d.valid, d.vocab.hash());
  TrainState state;
  state.adam = AdamState::zeros_like(model.parameters());
  Rng before_rng(0);
  const double before = evaluate_objective(model, d.valid, 32, before_rng);
  train(task, quick(20), state);
  CHECK(state.log.back().val_elbo < before - 1.0);
  CHECK(state.best_val <= state.log.back().val_elbo);
}
