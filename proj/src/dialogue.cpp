#include "twr/dialogue.hpp"

#include <algorithm>
#include <stdexcept>

#include "twr/csv.hpp"

namespace twr {

using nlohmann::json;

void DialogueConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || z_dim < 1) {
    throw std::invalid_argument("dialogue: embed_dim, hidden_dim and z_dim must be >= 1");
  }
  if (vocab_size <= Vocab::kSpecialCount) {
    throw std::invalid_argument("dialogue: vocab_size must exceed the special tokens");
  }
  if (window < 1) throw std::invalid_argument("dialogue: window must be >= 1");
  if (prior_hidden < 0) throw std::invalid_argument("dialogue: prior_hidden must be >= 0");
  if (mc_samples < 1) throw std::invalid_argument("dialogue: mc_samples must be >= 1");
  if (!(net_init_scale > 0.0)) throw std::invalid_argument("dialogue: net_init_scale must be > 0");
}

int DialogueConfig::resolved_prior_hidden() const {
  return prior_hidden > 0 ? prior_hidden : std::max(2 * z_dim, 100);
}

json to_json(const DialogueConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"z_dim", c.z_dim},
          {"vocab_size", c.vocab_size},
          {"window", c.window},
          {"prior_hidden", c.resolved_prior_hidden()},
          {"elbo_variant", std::string(to_string(c.variant))},
          {"learned_prior", c.learned_prior},
          {"mc_samples", c.mc_samples},
          {"net_init_scale", c.net_init_scale}};
}

DialogueConfig dialogue_config_from_json(const json& j) {
  DialogueConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.z_dim = j.at("z_dim").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.window = j.at("window").get<int>();
  c.prior_hidden = j.at("prior_hidden").get<int>();
  c.variant = parse_elbo_variant(j.at("elbo_variant").get<std::string>());
  c.learned_prior = j.at("learned_prior").get<bool>();
  c.mc_samples = j.at("mc_samples").get<int>();
  c.net_init_scale = j.at("net_init_scale").get<double>();
  c.validate();
  return c;
}

DialogueExample make_dialogue_example(std::span<const Sentence> context, Sentence response,
                                      int window) {
  if (window < 1) throw std::invalid_argument("dialogue example: window must be >= 1");
  if (context.empty()) throw std::invalid_argument("dialogue example: empty context");
  const std::size_t keep = std::min(context.size(), static_cast<std::size_t>(window));
  const auto tail = context.subspan(context.size() - keep);
  if (std::all_of(tail.begin(), tail.end(), [](const Sentence& s) { return s.empty(); })) {
    throw std::invalid_argument("dialogue example: all context utterances are empty");
  }
  DialogueExample ex;
  ex.context.assign(static_cast<std::size_t>(window) - keep, Sentence{});
  ex.context.insert(ex.context.end(), tail.begin(), tail.end());
  ex.response = std::move(response);
  ex.turns = static_cast<int>(keep);
  return ex;
}

std::vector<DialogueExample> make_dialogue_examples(
    const std::vector<std::vector<std::string>>& dialogues, const Vocab& vocab, int window) {
  std::vector<DialogueExample> out;
  for (const auto& d : dialogues) {
    if (d.size() < 2) continue;
    Sentence response = encode_tokens(vocab, d.back());
    if (response.empty()) continue;
    std::vector<Sentence> context;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) context.push_back(encode_tokens(vocab, d[i]));
    if (std::all_of(context.begin(), context.end(), [](const Sentence& s) { return s.empty(); })) {
      continue;
    }
    out.push_back(make_dialogue_example(context, std::move(response), window));
  }
  return out;
}

// --- DialogueModel -----------------------------------------------------------

DialogueModel::DialogueModel(DialogueConfig config, Rng& init_rng) : config_(config) {
  config_.validate();
  build(init_rng);
}

DialogueModel::DialogueModel(DialogueConfig config, ParameterSet params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  Rng probe(0);
  DialogueModel reference(config_, probe);
  const ParameterSet& want = reference.parameters();
  if (want.size() != params_.size()) {
    throw std::invalid_argument("dialogue model: expected " + std::to_string(want.size()) +
                                " parameters, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want.name(i) != params_.name(i) || want[i].rows() != params_[i].rows() ||
        want[i].cols() != params_[i].cols()) {
      throw std::invalid_argument("dialogue model: parameter " + std::to_string(i) + " is " +
                                  params_.name(i) + ", expected " + want.name(i) + " " +
                                  std::to_string(want[i].rows()) + "x" +
                                  std::to_string(want[i].cols()));
    }
  }
}

void DialogueModel::build(Rng& rng) {
  const double s = 0.08;
  const double sn = config_.net_init_scale;
  const Eigen::Index V = config_.vocab_size;
  const Eigen::Index E = config_.embed_dim;
  const Eigen::Index H = config_.hidden_dim;
  const Eigen::Index Z = config_.z_dim;
  const Eigen::Index P = config_.resolved_prior_hidden();

  auto add_cell = [&](const std::string& prefix, Eigen::Index in) {
    CellParams c = init_cell_params(CellFamily::Gru, in, H, rng, s);
    params_.add(prefix + ".W", c.input_weights);
    params_.add(prefix + ".U", c.recurrent_weights);
    params_.add(prefix + ".b", c.bias);
  };
  params_.add("embedding", rng.uniform_matrix(V, E, -s, s));
  add_cell("utterance.fwd", E);
  add_cell("utterance.bwd", E);
  add_cell("context", 2 * H);
  params_.add("recognition.W", rng.uniform_matrix(3 * H, 2 * Z, -sn, sn));
  params_.add("recognition.b", Matrix::Zero(1, 2 * Z));
  params_.add("prior.W1", rng.uniform_matrix(H, P, -sn, sn));
  params_.add("prior.b1", Matrix::Zero(1, P));
  params_.add("prior.W2", rng.uniform_matrix(P, 2 * Z, -sn, sn));
  params_.add("prior.b2", Matrix::Zero(1, 2 * Z));
  params_.add("decoder.init.W", rng.uniform_matrix(Z + H, H, -s, s));
  params_.add("decoder.init.b", Matrix::Zero(1, H));
  add_cell("decoder", E);
  params_.add("output.W", rng.uniform_matrix(H, V, -s, s));
  params_.add("output.b", Matrix::Zero(1, V));
}

DialogueModel::Bound DialogueModel::bind(Tape& tape) const {
  const std::vector<Var> leaves = params_.bind(tape);
  return bind(leaves);
}

DialogueModel::Bound DialogueModel::bind(std::span<const Var> leaves) const {
  if (leaves.size() != params_.size()) {
    throw std::invalid_argument("bind: expected " + std::to_string(params_.size()) +
                                " leaves, got " + std::to_string(leaves.size()));
  }
  auto at = [&](std::string_view name) { return leaves[params_.index(name)]; };
  auto cell = [&](const std::string& p) {
    return twr::bind(CellFamily::Gru, at(p + ".W"), at(p + ".U"), at(p + ".b"));
  };
  Bound b;
  b.leaves.assign(leaves.begin(), leaves.end());
  b.embedding = at("embedding");
  b.utterance_fwd = cell("utterance.fwd");
  b.utterance_bwd = cell("utterance.bwd");
  b.context = cell("context");
  b.recognition_weights = at("recognition.W");
  b.recognition_bias = at("recognition.b");
  b.prior_w1 = at("prior.W1");
  b.prior_b1 = at("prior.b1");
  b.prior_w2 = at("prior.W2");
  b.prior_b2 = at("prior.b2");
  b.init_weights = at("decoder.init.W");
  b.init_bias = at("decoder.init.b");
  b.decoder.embedding = b.embedding;
  b.decoder.cell = cell("decoder");
  b.decoder.output_weights = at("output.W");
  b.decoder.output_bias = at("output.b");
  return b;
}

Var DialogueModel::encode_utterances(Tape& tape, const Bound& vars,
                                     std::span<const Sentence> utterances) const {
  const auto N = static_cast<Eigen::Index>(utterances.size());
  const Eigen::Index H = config_.hidden_dim;
  std::size_t longest = 0;
  std::vector<int> lengths;
  for (const auto& u : utterances) {
    longest = std::max(longest, u.size());
    lengths.push_back(static_cast<int>(u.size()));
  }
  if (longest == 0) return tape.constant(Matrix::Zero(N, 2 * H));

  std::vector<Var> fwd_in;
  std::vector<Var> bwd_in;
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<int> f(utterances.size(), Vocab::kPad);
    std::vector<int> r(utterances.size(), Vocab::kPad);
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      const Sentence& u = utterances[i];
      if (t < u.size()) {
        f[i] = u[t];
        r[i] = u[u.size() - 1 - t];
      }
    }
    fwd_in.push_back(tape.gather(vars.embedding, std::move(f)));
    bwd_in.push_back(tape.gather(vars.embedding, std::move(r)));
  }
  const HiddenStates fwd = encode_sequence(tape, vars.utterance_fwd, fwd_in);
  const HiddenStates bwd = encode_sequence(tape, vars.utterance_bwd, bwd_in);
  return tape.concat_cols(select_final(tape, fwd.h, lengths), select_final(tape, bwd.h, lengths));
}

namespace {

void check_examples(std::span<const DialogueExample> examples, int window) {
  if (examples.empty()) throw std::invalid_argument("dialogue: empty batch");
  for (const auto& ex : examples) {
    if (static_cast<int>(ex.context.size()) != window) {
      throw std::invalid_argument("dialogue: context has " + std::to_string(ex.context.size()) +
                                  " utterances, model window is " + std::to_string(window));
    }
    if (ex.turns < 1) throw std::invalid_argument("dialogue: context has no real utterances");
  }
}

}  // namespace

std::vector<Var> DialogueModel::encode_context(Tape& tape, const Bound& vars,
                                               std::span<const DialogueExample> examples) const {
  const int J = config_.window;
  check_examples(examples, J);
  const auto B = static_cast<Eigen::Index>(examples.size());
  std::vector<Sentence> utterances;
  for (int j = 0; j < J; ++j) {
    for (const auto& ex : examples) utterances.push_back(ex.context[static_cast<std::size_t>(j)]);
  }
  const Var summaries = encode_utterances(tape, vars, utterances);
  std::vector<Var> inputs;
  for (int j = 0; j < J; ++j) inputs.push_back(tape.slice_rows(summaries, j * B, B));
  return encode_sequence(tape, vars.context, inputs).h;
}

GaussianVars DialogueModel::prior(Tape& tape, const Bound& vars, Var context_state) const {
  const Eigen::Index Z = config_.z_dim;
  if (!config_.learned_prior) {
    const Var zero = tape.constant(Matrix::Zero(tape.rows(context_state), Z));
    return {zero, zero};
  }
  const Var hidden =
      tape.tanh(tape.add_row(tape.matmul(context_state, vars.prior_w1), vars.prior_b1));
  const Var out = tape.add_row(tape.matmul(hidden, vars.prior_w2), vars.prior_b2);
  return {tape.slice_cols(out, 0, Z), tape.slice_cols(out, Z, Z)};
}

GaussianVars DialogueModel::recognition(Tape& tape, const Bound& vars, Var response_summary,
                                        Var context_state) const {
  const Eigen::Index Z = config_.z_dim;
  const Var in = tape.concat_cols(response_summary, context_state);
  const Var out = tape.add_row(tape.matmul(in, vars.recognition_weights), vars.recognition_bias);
  return {tape.slice_cols(out, 0, Z), tape.slice_cols(out, Z, Z)};
}

CellState DialogueModel::decoder_initial_state(Tape& tape, const Bound& vars, Var z,
                                               Var context_state) const {
  CellState s;
  s.h = tape.add_row(tape.matmul(tape.concat_cols(z, context_state), vars.init_weights),
                     vars.init_bias);
  return s;
}

ElboBreakdown DialogueModel::compute_elbo(Tape& tape, const Bound& vars,
                                          std::span<const DialogueExample> examples,
                                          double beta, Rng& rng) const {
  const int J = config_.window;
  const auto B = static_cast<Eigen::Index>(examples.size());
  const std::vector<Var> states = encode_context(tape, vars, examples);

  std::vector<Sentence> responses;
  for (const auto& ex : examples) {
    if (ex.response.empty()) throw std::invalid_argument("dialogue: empty response");
    responses.push_back(ex.response);
  }
  const Var response_summary = encode_utterances(tape, vars, responses);

  // All positions at once, stacked j-major: row j*B + b.
  const Var context_all = tape.concat_rows(states);
  std::vector<Var> repeated(static_cast<std::size_t>(J), response_summary);
  const GaussianVars q = recognition(tape, vars, tape.concat_rows(repeated), context_all);
  const GaussianVars p = prior(tape, vars, context_all);
  const Var kl_all = kl_prior_recognition(tape, q.mu, q.log_var, p.mu, p.log_var);

  Matrix kl_weights = Matrix::Zero(1, B * J);
  for (Eigen::Index b = 0; b < B; ++b) {
    const DialogueExample& ex = examples[static_cast<std::size_t>(b)];
    const int first = config_.variant == ElboVariant::Basic ? J - 1 : ex.first_real();
    for (int j = first; j < J; ++j) {
      kl_weights(0, j * B + b) = 1.0 / (static_cast<double>(J - first) * B);
    }
  }
  const Var kl_avg = tape.matmul(tape.constant(kl_weights), kl_all);

  const Var mu_last = tape.slice_rows(q.mu, (J - 1) * B, B);
  const Var lv_last = tape.slice_rows(q.log_var, (J - 1) * B, B);
  const Batch target = make_batch(responses);
  const int M = config_.mc_samples;
  Var recon;
  Vector recon_rows = Vector::Zero(B);
  for (int m = 0; m < M; ++m) {
    const Matrix eps = rng.normal_matrix(B, config_.z_dim);
    const Var z = reparameterize(tape, mu_last, lv_last, eps);
    const Var rows =
        decoder_nll(tape, vars.decoder, decoder_initial_state(tape, vars, z, states.back()), target);
    recon_rows += tape.value(rows).col(0);
    const Var r = tape.mean(rows);
    recon = recon.valid() ? tape.add(recon, r) : r;
  }
  if (M > 1) recon = tape.scale(recon, 1.0 / M);
  recon_rows /= M;

  ElboBreakdown out;
  out.beta = beta;
  out.loss = tape.add(recon, tape.scale(kl_avg, beta));
  out.recon = tape.scalar(recon);
  out.kl_avg = tape.scalar(kl_avg);
  out.objective = tape.scalar(out.loss);
  out.recon_rows.assign(recon_rows.data(), recon_rows.data() + B);

  const Matrix& kl_values = tape.value(kl_all);
  out.kl_per_step.assign(static_cast<std::size_t>(J), 0.0);
  out.kl_rows.assign(static_cast<std::size_t>(B), 0.0);
  for (int j = 0; j < J; ++j) {
    int real = 0;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (j >= examples[static_cast<std::size_t>(b)].first_real()) {
        out.kl_per_step[static_cast<std::size_t>(j)] += kl_values(j * B + b, 0);
        ++real;
      }
      out.kl_rows[static_cast<std::size_t>(b)] +=
          kl_weights(0, j * B + b) * static_cast<double>(B) * kl_values(j * B + b, 0);
    }
    if (real > 0) out.kl_per_step[static_cast<std::size_t>(j)] /= real;
  }
  return out;
}

Matrix DialogueModel::context_states(const DialogueExample& example) const {
  Tape tape;
  const Bound vars = bind(tape);
  const auto states = encode_context(tape, vars, std::span(&example, 1));
  Matrix out(static_cast<Eigen::Index>(states.size()), config_.hidden_dim);
  for (std::size_t j = 0; j < states.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = tape.value(states[j]);
  }
  return out;
}

std::vector<Sentence> DialogueModel::sample_responses(const DialogueExample& example, int n,
                                                      Rng& rng, int max_len) const {
  if (n < 1) throw std::invalid_argument("sample_responses: n must be >= 1");
  Tape tape;
  const Bound vars = bind(tape);
  const auto states = encode_context(tape, vars, std::span(&example, 1));
  const GaussianVars p = prior(tape, vars, states.back());
  std::vector<Var> c(static_cast<std::size_t>(n), states.back());
  std::vector<Var> mu(static_cast<std::size_t>(n), p.mu);
  std::vector<Var> lv(static_cast<std::size_t>(n), p.log_var);
  const Matrix eps = rng.normal_matrix(n, config_.z_dim);
  const Var z = reparameterize(tape, tape.concat_rows(mu), tape.concat_rows(lv), eps);
  return greedy_decode(tape, vars.decoder,
                       decoder_initial_state(tape, vars, z, tape.concat_rows(c)), max_len);
}

Sentence DialogueModel::greedy_mean_response(const DialogueExample& example, int max_len) const {
  Tape tape;
  const Bound vars = bind(tape);
  const auto states = encode_context(tape, vars, std::span(&example, 1));
  const GaussianVars p = prior(tape, vars, states.back());
  return greedy_decode(tape, vars.decoder,
                       decoder_initial_state(tape, vars, p.mu, states.back()), max_len)
      .front();
}

// --- training glue -------------------------------------------------------------

DialogueTask::DialogueTask(DialogueModel& model, std::span<const DialogueExample> train,
                           std::span<const DialogueExample> valid, std::uint64_t vocab_hash)
    : model_(model), train_(train), valid_(valid), vocab_hash_(vocab_hash) {}

ElboBreakdown DialogueTask::batch_loss(Tape& tape, std::span<const Var> leaves,
                                       std::span<const std::size_t> rows, double beta,
                                       Rng& rng) const {
  std::vector<DialogueExample> batch;
  batch.reserve(rows.size());
  for (std::size_t r : rows) batch.push_back(train_[r]);
  return model_.compute_elbo(tape, model_.bind(leaves), batch, beta, rng);
}

double DialogueTask::validation_objective(int batch_size, Rng& rng) const {
  return evaluate_dialogue_objective(model_, valid_, batch_size, rng);
}

json DialogueTask::describe() const {
  return {{"kind", "dialogue-cvae"}, {"model", to_json(model_.config())}};
}

namespace {

template <class F>
double batched_mean(std::span<const DialogueExample> data, int batch_size, F&& per_batch) {
  if (data.empty()) return 0.0;
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  double total = 0.0;
  for (std::size_t at = 0; at < data.size(); at += static_cast<std::size_t>(batch_size)) {
    const auto chunk =
        data.subspan(at, std::min(data.size() - at, static_cast<std::size_t>(batch_size)));
    total += per_batch(chunk) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

double evaluate_dialogue_objective(const DialogueModel& model,
                                   std::span<const DialogueExample> data, int batch_size,
                                   Rng& rng) {
  return batched_mean(data, batch_size, [&](std::span<const DialogueExample> chunk) {
    Tape tape;
    return model.compute_elbo(tape, model.bind(tape), chunk, 1.0, rng).objective;
  });
}

double mean_position_kl(const DialogueModel& model, std::span<const DialogueExample> data,
                        int batch_size, Rng& rng) {
  return batched_mean(data, batch_size, [&](std::span<const DialogueExample> chunk) {
    Tape tape;
    return model.compute_elbo(tape, model.bind(tape), chunk, 1.0, rng).kl_avg;
  });
}

DialogueSamples sample_all(const DialogueModel& model, std::span<const DialogueExample> data,
                           int n, Rng& rng, int max_len) {
  DialogueSamples s;
  for (const auto& ex : data) s.responses.push_back(model.sample_responses(ex, n, rng, max_len));
  return s;
}

DialogueScores score_responses(std::span<const DialogueExample> data,
                               const DialogueSamples& samples, const Matrix& embeddings) {
  if (samples.responses.size() != data.size()) {
    throw std::invalid_argument("score_responses: " + std::to_string(samples.responses.size()) +
                                " response sets for " + std::to_string(data.size()) + " contexts");
  }
  DialogueScores out;
  out.contexts = data.size();
  if (data.empty()) return out;
  out.responses_per_context = static_cast<int>(samples.responses.front().size());
  long bow_count = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& responses = samples.responses[i];
    const std::vector<Sentence> refs{data[i].response};
    const BleuScores b = bleu_prf(responses, refs);
    out.bleu.precision += b.precision;
    out.bleu.recall += b.recall;
    for (const auto& r : responses) {
      const BowScores w = bow_embedding_scores(r, data[i].response, embeddings);
      out.bow.average += w.average;
      out.bow.extreme += w.extreme;
      out.bow.greedy += w.greedy;
      ++bow_count;
    }
  }
  const double n = static_cast<double>(data.size());
  out.bleu.precision /= n;
  out.bleu.recall /= n;
  out.bleu.f1 = out.bleu.precision + out.bleu.recall > 0.0
                    ? 2.0 * out.bleu.precision * out.bleu.recall /
                          (out.bleu.precision + out.bleu.recall)
                    : 0.0;
  if (bow_count > 0) {
    out.bow.average /= static_cast<double>(bow_count);
    out.bow.extreme /= static_cast<double>(bow_count);
    out.bow.greedy /= static_cast<double>(bow_count);
  }
  out.dist = dist_scores(samples.responses);
  return out;
}

void write_dialogue_scores_csv(const DialogueScores& s, const std::string& dataset,
                               const std::string& model_name, const std::string& estimator,
                               const std::filesystem::path& path) {
  CsvWriter csv(path, {"dataset", "model", "metric", "value", "estimator"});
  const std::pair<const char*, double> rows[] = {
      {"bleu_p", s.bleu.precision},   {"bleu_r", s.bleu.recall},
      {"bleu_f1", s.bleu.f1},         {"bow_average", s.bow.average},
      {"bow_extreme", s.bow.extreme}, {"bow_greedy", s.bow.greedy},
      {"intra_dist1", s.dist.intra_dist1}, {"intra_dist2", s.dist.intra_dist2},
      {"inter_dist1", s.dist.inter_dist1}, {"inter_dist2", s.dist.inter_dist2}};
  for (const auto& [metric, value] : rows) {
    csv.row() << dataset << model_name << metric << value << estimator;
  }
}

}  // namespace twr
