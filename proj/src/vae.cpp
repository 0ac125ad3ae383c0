#include "twr/vae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace twr {

std::string_view to_string(ElboVariant v) {
  return v == ElboVariant::Basic ? "basic" : "twr";
}

std::string_view to_string(CombineMode m) {
  switch (m) {
    case CombineMode::Final: return "final";
    case CombineMode::Mean: return "mean";
    case CombineMode::Sum: return "sum";
  }
  return "?";
}

std::string_view to_string(AnnealSchedule s) {
  switch (s) {
    case AnnealSchedule::Constant: return "constant";
    case AnnealSchedule::Linear: return "linear";
    case AnnealSchedule::Cyclical: return "cyclical";
  }
  return "?";
}

ElboVariant parse_elbo_variant(std::string_view s) {
  if (s == "basic") return ElboVariant::Basic;
  if (s == "twr") return ElboVariant::Twr;
  throw std::invalid_argument("unknown elbo variant '" + std::string(s) +
                              "' (expected basic or twr)");
}

CombineMode parse_combine_mode(std::string_view s) {
  if (s == "final") return CombineMode::Final;
  if (s == "mean") return CombineMode::Mean;
  if (s == "sum") return CombineMode::Sum;
  throw std::invalid_argument("unknown combine mode '" + std::string(s) +
                              "' (expected final, mean or sum)");
}

AnnealSchedule parse_anneal_schedule(std::string_view s) {
  if (s == "constant") return AnnealSchedule::Constant;
  if (s == "linear") return AnnealSchedule::Linear;
  if (s == "cyclical") return AnnealSchedule::Cyclical;
  throw std::invalid_argument("unknown anneal schedule '" + std::string(s) +
                              "' (expected constant, linear or cyclical)");
}

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || z_dim < 1) {
    throw std::invalid_argument("model: embed_dim, hidden_dim and z_dim must be >= 1");
  }
  if (vocab_size <= Vocab::kSpecialCount) {
    throw std::invalid_argument("model: vocab_size must exceed the special tokens");
  }
  if (!(reg_fraction > 0.0 && reg_fraction <= 1.0)) {
    throw std::invalid_argument("model: reg_fraction " + std::to_string(reg_fraction) +
                                " outside (0, 1]");
  }
  if (mc_samples < 1) throw std::invalid_argument("model: mc_samples must be >= 1");
}

int regularised_steps(ElboVariant variant, double reg_fraction, int length) {
  if (!(reg_fraction > 0.0 && reg_fraction <= 1.0)) {
    throw std::invalid_argument("reg_fraction " + std::to_string(reg_fraction) +
                                " outside (0, 1]");
  }
  if (length < 1) throw std::invalid_argument("sentence length must be >= 1");
  if (variant == ElboVariant::Basic) return 1;
  // The small slack keeps products such as 0.1 * 30 from rounding up a step.
  const int steps = static_cast<int>(std::ceil(reg_fraction * length - 1e-9));
  return std::clamp(steps, 1, length);
}

DiagGaussian decoder_input_posterior(const PosteriorSequence& posterior,
                                     CombineMode mode) {
  const int T = posterior.length();
  if (T < 1) throw std::invalid_argument("decoder_input_posterior: empty sequence");
  DiagGaussian g;
  switch (mode) {
    case CombineMode::Final:
      g.mu = posterior.mu.row(T - 1);
      g.log_var = posterior.log_var.row(T - 1);
      break;
    case CombineMode::Mean: {
      g.mu = posterior.mu.colwise().mean();
      const RowVector var = posterior.log_var.array().exp().colwise().sum();
      g.log_var = (var.array() / (static_cast<double>(T) * T)).log();
      break;
    }
    case CombineMode::Sum:
      g.mu = posterior.mu.colwise().sum();
      g.log_var = posterior.log_var.array().exp().colwise().sum().log();
      break;
  }
  return g;
}

RowVector combine_latents(const Matrix& z, CombineMode mode) {
  if (z.rows() < 1) throw std::invalid_argument("combine_latents: empty sequence");
  switch (mode) {
    case CombineMode::Final: return z.row(z.rows() - 1);
    case CombineMode::Mean: return z.colwise().mean();
    case CombineMode::Sum: return z.colwise().sum();
  }
  return {};
}

GaussianVars posterior_params(Tape& tape, const PosteriorHead& head, Var h) {
  if (tape.cols(h) != tape.rows(head.mu_weights)) {
    throw std::invalid_argument("posterior_params: hidden state has " +
                                std::to_string(tape.cols(h)) + " columns, heads expect " +
                                std::to_string(tape.rows(head.mu_weights)));
  }
  GaussianVars g;
  g.mu = tape.add_row(tape.matmul(h, head.mu_weights), head.mu_bias);
  g.log_var = tape.add_row(tape.matmul(h, head.log_var_weights), head.log_var_bias);
  return g;
}

Var reparameterize(Tape& tape, Var mu, Var log_var, const Matrix& eps) {
  const Var sigma = tape.exp(tape.scale(log_var, 0.5));
  return tape.add(mu, tape.mul(sigma, tape.constant(eps)));
}

Var kl_standard_normal(Tape& tape, Var mu, Var log_var) {
  // 0.5 * (mu^2 + exp(lv) - 1 - lv)
  const Var inner = tape.add_scalar(
      tape.sub(tape.add(tape.mul(mu, mu), tape.exp(log_var)), log_var), -1.0);
  return tape.scale(tape.row_sum(inner), 0.5);
}

Var kl_diag_gaussians(Tape& tape, Var mu_q, Var lv_q, Var mu_p, Var lv_p) {
  // 0.5 * (lv_p - lv_q + exp(lv_q - lv_p) + (mu_q - mu_p)^2 * exp(-lv_p) - 1)
  const Var diff = tape.sub(mu_q, mu_p);
  const Var log_ratio = tape.sub(lv_q, lv_p);
  const Var spread = tape.mul(tape.mul(diff, diff), tape.exp(tape.scale(lv_p, -1.0)));
  const Var inner = tape.add_scalar(
      tape.add(tape.sub(tape.exp(log_ratio), log_ratio), spread), -1.0);
  return tape.scale(tape.row_sum(inner), 0.5);
}

namespace {

std::vector<int> column(const Batch& batch, int t) {
  std::vector<int> out(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    out[static_cast<std::size_t>(b)] = batch.ids(b, t);
  }
  return out;
}

}  // namespace

Var decoder_nll(Tape& tape, const DecoderVars& decoder, const CellState& initial,
                const Batch& batch) {
  const Eigen::Index B = batch.size();
  const int T = batch.max_length();
  CellState state = initial;
  std::vector<Var> hidden;
  hidden.reserve(static_cast<std::size_t>(T) + 1);
  std::vector<int> targets;
  targets.reserve(static_cast<std::size_t>(B * (T + 1)));
  Matrix select = Matrix::Zero(B, B * (T + 1));

  for (int t = 0; t <= T; ++t) {
    std::vector<int> input =
        t == 0 ? std::vector<int>(static_cast<std::size_t>(B), Vocab::kBos)
               : column(batch, t - 1);
    state = cell_step(tape, decoder.cell, tape.gather(decoder.embedding, std::move(input)),
                      state);
    hidden.push_back(state.h);
    for (Eigen::Index b = 0; b < B; ++b) {
      const int len = batch.lengths[static_cast<std::size_t>(b)];
      int target = Vocab::kPad;
      if (t < len) {
        target = batch.ids(b, t);
      } else if (t == len) {
        target = Vocab::kEos;
      }
      if (t <= len) select(b, t * B + b) = 1.0;
      targets.push_back(target);
    }
  }
  const Var stacked = tape.concat_rows(hidden);
  const Var logits =
      tape.add_row(tape.matmul(stacked, decoder.output_weights), decoder.output_bias);
  const Var xent = tape.softmax_xent(logits, std::move(targets));
  return tape.matmul(tape.constant(std::move(select)), xent);
}

std::vector<Sentence> greedy_decode(Tape& tape, const DecoderVars& decoder,
                                    const CellState& initial, int max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  const Eigen::Index B = tape.rows(initial.h);
  std::vector<Sentence> out(static_cast<std::size_t>(B));
  std::vector<char> done(static_cast<std::size_t>(B), 0);
  std::vector<int> current(static_cast<std::size_t>(B), Vocab::kBos);
  CellState state = initial;
  for (int step = 0; step < max_len; ++step) {
    state = cell_step(tape, decoder.cell, tape.gather(decoder.embedding, current), state);
    const Var logits =
        tape.add_row(tape.matmul(state.h, decoder.output_weights), decoder.output_bias);
    const Matrix& l = tape.value(logits);
    bool all_done = true;
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto bi = static_cast<std::size_t>(b);
      Eigen::Index best = 0;
      l.row(b).maxCoeff(&best);
      current[bi] = static_cast<int>(best);
      if (done[bi]) continue;
      if (best == Vocab::kEos) {
        done[bi] = 1;
      } else {
        out[bi].push_back(static_cast<int>(best));
        all_done = false;
      }
    }
    if (all_done) break;
  }
  return out;
}

double anneal_weight(AnnealSchedule schedule, long step, long total_steps,
                     int cycles, double ramp_fraction) {
  if (step < 0) throw std::invalid_argument("anneal_weight: step must be >= 0");
  if (cycles < 1) throw std::invalid_argument("anneal_weight: cycles must be >= 1");
  if (schedule == AnnealSchedule::Constant) return 1.0;
  if (!(ramp_fraction > 0.0 && ramp_fraction <= 1.0)) {
    throw std::invalid_argument("anneal_weight: ramp_fraction outside (0, 1]");
  }
  if (total_steps < 1) throw std::invalid_argument("anneal_weight: total_steps must be >= 1");
  if (schedule == AnnealSchedule::Linear) {
    const double ramp = ramp_fraction * static_cast<double>(total_steps);
    return std::min(1.0, static_cast<double>(step) / ramp);
  }
  const double period = static_cast<double>(total_steps) / cycles;
  const double phase = std::fmod(static_cast<double>(step), period) / period;
  return std::min(1.0, phase / ramp_fraction);
}

// --- SentenceVae -----------------------------------------------------------

SentenceVae::SentenceVae(ModelConfig config, Rng& init_rng) : config_(config) {
  config_.validate();
  build(init_rng);
}

SentenceVae::SentenceVae(ModelConfig config, ParameterSet params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  Rng probe(0);
  SentenceVae reference(config_, probe);
  const ParameterSet& want = reference.parameters();
  if (want.size() != params_.size()) {
    throw std::invalid_argument("model: expected " + std::to_string(want.size()) +
                                " parameters, got " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want.name(i) != params_.name(i) || want[i].rows() != params_[i].rows() ||
        want[i].cols() != params_[i].cols()) {
      throw std::invalid_argument("model: parameter " + std::to_string(i) + " is " +
                                  params_.name(i) + " " +
                                  std::to_string(params_[i].rows()) + "x" +
                                  std::to_string(params_[i].cols()) + ", expected " +
                                  want.name(i) + " " + std::to_string(want[i].rows()) +
                                  "x" + std::to_string(want[i].cols()));
    }
  }
}

void SentenceVae::build(Rng& rng) {
  const double s = 0.08;
  const Eigen::Index V = config_.vocab_size;
  const Eigen::Index E = config_.embed_dim;
  const Eigen::Index H = config_.hidden_dim;
  const Eigen::Index Z = config_.z_dim;

  params_.add("embedding", rng.uniform_matrix(V, E, -s, s));
  CellParams enc = init_cell_params(config_.cell, E, H, rng, s);
  params_.add("encoder.W", enc.input_weights);
  params_.add("encoder.U", enc.recurrent_weights);
  params_.add("encoder.b", enc.bias);
  params_.add("posterior.mu.W", rng.uniform_matrix(H, Z, -s, s));
  params_.add("posterior.mu.b", Matrix::Zero(1, Z));
  params_.add("posterior.logvar.W", rng.uniform_matrix(H, Z, -s, s));
  params_.add("posterior.logvar.b", Matrix::Zero(1, Z));
  params_.add("decoder.init_h.W", rng.uniform_matrix(Z, H, -s, s));
  params_.add("decoder.init_h.b", Matrix::Zero(1, H));
  if (config_.cell == CellFamily::Lstm) {
    params_.add("decoder.init_c.W", rng.uniform_matrix(Z, H, -s, s));
    params_.add("decoder.init_c.b", Matrix::Zero(1, H));
  }
  CellParams dec = init_cell_params(config_.cell, E, H, rng, s);
  params_.add("decoder.W", dec.input_weights);
  params_.add("decoder.U", dec.recurrent_weights);
  params_.add("decoder.b", dec.bias);
  params_.add("output.W", rng.uniform_matrix(H, V, -s, s));
  params_.add("output.b", Matrix::Zero(1, V));
}

SentenceVae::Bound SentenceVae::bind(Tape& tape) const {
  const std::vector<Var> leaves = params_.bind(tape);
  return bind(leaves);
}

SentenceVae::Bound SentenceVae::bind(std::span<const Var> leaves) const {
  if (leaves.size() != params_.size()) {
    throw std::invalid_argument("bind: expected " + std::to_string(params_.size()) +
                                " leaves, got " + std::to_string(leaves.size()));
  }
  auto at = [&](std::string_view name) { return leaves[params_.index(name)]; };
  Bound b;
  b.leaves.assign(leaves.begin(), leaves.end());
  b.embedding = at("embedding");
  b.encoder = twr::bind(config_.cell, at("encoder.W"), at("encoder.U"), at("encoder.b"));
  b.head = {at("posterior.mu.W"), at("posterior.mu.b"), at("posterior.logvar.W"),
            at("posterior.logvar.b")};
  b.init_h_weights = at("decoder.init_h.W");
  b.init_h_bias = at("decoder.init_h.b");
  if (config_.cell == CellFamily::Lstm) {
    b.init_c_weights = at("decoder.init_c.W");
    b.init_c_bias = at("decoder.init_c.b");
  }
  b.decoder.embedding = b.embedding;
  b.decoder.cell = twr::bind(config_.cell, at("decoder.W"), at("decoder.U"), at("decoder.b"));
  b.decoder.output_weights = at("output.W");
  b.decoder.output_bias = at("output.b");
  return b;
}

GaussianVars SentenceVae::encode(Tape& tape, const Bound& vars,
                                 const Batch& batch) const {
  const int T = batch.max_length();
  if (batch.size() < 1 || T < 1) throw std::invalid_argument("encode: empty batch");
  for (int len : batch.lengths) {
    if (len < 1) throw std::invalid_argument("encode: empty sentence in batch");
  }
  std::vector<Var> inputs;
  inputs.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) inputs.push_back(tape.gather(vars.embedding, column(batch, t)));
  const HiddenStates states = encode_sequence(tape, vars.encoder, inputs);
  return posterior_params(tape, vars.head, tape.concat_rows(states.h));
}

CellState SentenceVae::decoder_initial_state(Tape& tape, const Bound& vars, Var z) const {
  CellState s;
  s.h = tape.add_row(tape.matmul(z, vars.init_h_weights), vars.init_h_bias);
  if (config_.cell == CellFamily::Lstm) {
    s.c = tape.add_row(tape.matmul(z, vars.init_c_weights), vars.init_c_bias);
  }
  return s;
}

ElboBreakdown SentenceVae::compute_elbo(Tape& tape, const Bound& vars,
                                        const Batch& batch, double beta,
                                        Rng& rng) const {
  const Eigen::Index B = batch.size();
  const int T = batch.max_length();
  const GaussianVars post = encode(tape, vars, batch);

  // KL weights and latent combination, both over t-major stacked rows.
  Matrix kl_weights = Matrix::Zero(1, B * T);
  Matrix combine = Matrix::Zero(B, B * T);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int len = batch.lengths[static_cast<std::size_t>(b)];
    const int reg = regularised_steps(config_.variant, config_.reg_fraction, len);
    for (int t = len - reg; t < len; ++t) {
      kl_weights(0, t * B + b) = 1.0 / (static_cast<double>(reg) * B);
    }
    switch (config_.combine) {
      case CombineMode::Final:
        combine(b, (len - 1) * B + b) = 1.0;
        break;
      case CombineMode::Mean:
        for (int t = 0; t < len; ++t) combine(b, t * B + b) = 1.0 / len;
        break;
      case CombineMode::Sum:
        for (int t = 0; t < len; ++t) combine(b, t * B + b) = 1.0;
        break;
    }
  }

  const Var kl_all = kl_standard_normal(tape, post.mu, post.log_var);
  const Var kl_avg = tape.matmul(tape.constant(kl_weights), kl_all);
  const Var combine_c = tape.constant(std::move(combine));

  const int M = config_.mc_samples;
  Var recon;
  Vector recon_rows = Vector::Zero(B);
  for (int m = 0; m < M; ++m) {
    const Matrix eps = rng.normal_matrix(B * T, config_.z_dim);
    const Var z_all = reparameterize(tape, post.mu, post.log_var, eps);
    const Var z = tape.matmul(combine_c, z_all);
    const Var rows = decoder_nll(tape, vars.decoder, decoder_initial_state(tape, vars, z), batch);
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
  out.kl_per_step.assign(static_cast<std::size_t>(T), 0.0);
  out.kl_rows.assign(static_cast<std::size_t>(B), 0.0);
  for (int t = 0; t < T; ++t) {
    int reached = 0;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (t < batch.lengths[static_cast<std::size_t>(b)]) {
        out.kl_per_step[static_cast<std::size_t>(t)] += kl_values(t * B + b, 0);
        ++reached;
      }
      out.kl_rows[static_cast<std::size_t>(b)] +=
          kl_weights(0, t * B + b) * static_cast<double>(B) * kl_values(t * B + b, 0);
    }
    if (reached > 0) out.kl_per_step[static_cast<std::size_t>(t)] /= reached;
  }
  return out;
}

std::vector<PosteriorSequence> SentenceVae::posteriors(const Batch& batch) const {
  Tape tape;
  const Bound vars = bind(tape);
  const GaussianVars post = encode(tape, vars, batch);
  const Matrix& mu = tape.value(post.mu);
  const Matrix& lv = tape.value(post.log_var);
  const Eigen::Index B = batch.size();
  std::vector<PosteriorSequence> out;
  out.reserve(static_cast<std::size_t>(B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const int len = batch.lengths[static_cast<std::size_t>(b)];
    PosteriorSequence seq;
    seq.mu.resize(len, config_.z_dim);
    seq.log_var.resize(len, config_.z_dim);
    for (int t = 0; t < len; ++t) {
      seq.mu.row(t) = mu.row(t * B + b);
      seq.log_var.row(t) = lv.row(t * B + b);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

Vector SentenceVae::log_likelihood(const Batch& batch, const Matrix& z) const {
  if (z.rows() != batch.size() || z.cols() != config_.z_dim) {
    throw std::invalid_argument("log_likelihood: z must be batch x z_dim");
  }
  Tape tape;
  const Bound vars = bind(tape);
  const Var nll = decoder_nll(tape, vars.decoder,
                              decoder_initial_state(tape, vars, tape.constant(z)), batch);
  return -tape.value(nll).col(0);
}

std::vector<Sentence> SentenceVae::generate_greedy(const Matrix& z, int max_len) const {
  if (z.cols() != config_.z_dim) {
    throw std::invalid_argument("generate_greedy: z has " + std::to_string(z.cols()) +
                                " columns, model expects " + std::to_string(config_.z_dim));
  }
  Tape tape;
  const Bound vars = bind(tape);
  return greedy_decode(tape, vars.decoder,
                       decoder_initial_state(tape, vars, tape.constant(z)), max_len);
}

Sentence SentenceVae::generate_greedy(const RowVector& z, int max_len) const {
  return generate_greedy(Matrix(z), max_len).front();
}

}  // namespace twr
