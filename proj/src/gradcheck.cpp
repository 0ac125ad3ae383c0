#include "twr/gradcheck.hpp"

#include <chrono>
#include <sstream>

#include "twr/dialogue.hpp"

namespace twr {

std::string GradCheckCase::label() const {
  std::ostringstream os;
  os << model << "/";
  if (model == "sentence") {
    os << to_string(cell) << "/" << to_string(variant) << "/" << to_string(combine)
       << "/rho=" << reg_fraction;
  } else {
    os << to_string(variant);
  }
  return os.str();
}

std::vector<GradCheckCase> default_grad_check_cases(bool include_dialogue) {
  std::vector<GradCheckCase> out;
  for (CellFamily cell : {CellFamily::Rnn, CellFamily::Gru, CellFamily::Lstm}) {
    for (ElboVariant v : {ElboVariant::Basic, ElboVariant::Twr}) {
      for (CombineMode m : {CombineMode::Final, CombineMode::Mean, CombineMode::Sum}) {
        for (double rho : {0.25, 0.5, 0.75, 1.0}) {
          out.push_back({"sentence", cell, v, m, rho});
        }
      }
    }
  }
  if (include_dialogue) {
    for (ElboVariant v : {ElboVariant::Basic, ElboVariant::Twr}) {
      out.push_back({"dialogue", CellFamily::Gru, v, CombineMode::Final, 1.0});
    }
  }
  return out;
}

namespace {

constexpr int kToyVocab = 12;

std::vector<Sentence> toy_sentences() {
  return {{4, 5, 6, 7, 8, 9, 10, 11}, {6, 4, 11, 5, 7}};
}

std::vector<Matrix> randomised(const ParameterSet& params, Rng& rng) {
  std::vector<Matrix> out;
  for (const Matrix& m : params.values()) out.push_back(rng.uniform_matrix(m.rows(), m.cols(), -0.5, 0.5));
  return out;
}

}  // namespace

Batch grad_check_batch() { return make_batch(toy_sentences()); }

GradCheckRow run_grad_check(const GradCheckCase& c, std::uint64_t seed, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  Rng init(derive_seed(seed, "init"));
  const std::uint64_t noise_seed = derive_seed(seed, "noise");
  GradCheckRow row;
  row.config = c;

  if (c.model == "sentence") {
    ModelConfig mc;
    mc.cell = c.cell;
    mc.embed_dim = 3;
    mc.hidden_dim = 3;
    mc.z_dim = 2;
    mc.vocab_size = kToyVocab;
    mc.variant = c.variant;
    mc.combine = c.combine;
    mc.reg_fraction = c.reg_fraction;
    const SentenceVae model(mc, init);
    const Batch batch = grad_check_batch();
    const auto values = randomised(model.parameters(), init);
    row.result = grad_check(
        [&](Tape& tape, std::span<const Var> leaves) {
          Rng noise(noise_seed);
          return model.compute_elbo(tape, model.bind(leaves), batch, 1.0, noise).loss;
        },
        values);
  } else if (c.model == "dialogue") {
    DialogueConfig dc;
    dc.embed_dim = 3;
    dc.hidden_dim = 3;
    dc.z_dim = 2;
    dc.prior_hidden = 3;
    dc.vocab_size = kToyVocab;
    dc.window = 3;
    dc.variant = c.variant;
    const DialogueModel model(dc, init);
    const auto s = toy_sentences();
    std::vector<DialogueExample> examples;
    examples.push_back(make_dialogue_example(std::vector<Sentence>{{4, 5, 6}, {7, 8}}, s[0], 3));
    examples.push_back(make_dialogue_example(std::vector<Sentence>{{9, 10, 11, 4}}, s[1], 3));
    const auto values = randomised(model.parameters(), init);
    row.result = grad_check(
        [&](Tape& tape, std::span<const Var> leaves) {
          Rng noise(noise_seed);
          return model.compute_elbo(tape, model.bind(leaves), examples, 1.0, noise).loss;
        },
        values);
  } else {
    throw std::invalid_argument("grad-check: unknown model '" + c.model + "'");
  }
  row.pass = row.result.max_relative_error < tolerance;
  row.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace twr
