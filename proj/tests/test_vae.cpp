#include "doctest.h"

#include <cmath>
#include <vector>

#include "twr/gaussian.hpp"
#include "twr/vae.hpp"

using namespace twr;

namespace {

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// One step of the documented cell equations on plain row vectors.
void plain_step(CellFamily f, const Matrix& W, const Matrix& U, const Matrix& b,
                const RowVector& x, RowVector& h, RowVector& c) {
  const Eigen::Index H = h.size();
  const RowVector xw = x * W + b;
  const RowVector hu = h * U;
  RowVector next(H);
  if (f == CellFamily::Rnn) {
    for (Eigen::Index k = 0; k < H; ++k) next(k) = std::tanh(xw(k) + hu(k));
  } else if (f == CellFamily::Gru) {
    for (Eigen::Index k = 0; k < H; ++k) {
      const double z = sig(xw(k) + hu(k));
      const double r = sig(xw(H + k) + hu(H + k));
      const double n = std::tanh(xw(2 * H + k) + r * hu(2 * H + k));
      next(k) = (1 - z) * h(k) + z * n;
    }
  } else {
    RowVector c2(H);
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = sig(xw(k) + hu(k));
      const double fg = sig(xw(H + k) + hu(H + k));
      const double g = std::tanh(xw(2 * H + k) + hu(2 * H + k));
      const double o = sig(xw(3 * H + k) + hu(3 * H + k));
      c2(k) = fg * c(k) + i * g;
      next(k) = o * std::tanh(c2(k));
    }
    c = c2;
  }
  h = next;
}

struct PlainElbo {
  double recon = 0.0;
  double kl_avg = 0.0;
  double objective = 0.0;
};

/// Independent recomputation of the objective, one sentence at a time.
/// eps rows are laid out t-major over the padded batch, as the model draws them.
PlainElbo plain_elbo(const SentenceVae& model, const std::vector<Sentence>& sentences,
                     const Matrix& eps, double beta) {
  const ModelConfig& mc = model.config();
  const ParameterSet& p = model.parameters();
  const Eigen::Index H = mc.hidden_dim;
  const auto B = static_cast<Eigen::Index>(sentences.size());
  PlainElbo out;
  for (Eigen::Index bi = 0; bi < B; ++bi) {
    const Sentence& s = sentences[static_cast<std::size_t>(bi)];
    const int T = static_cast<int>(s.size());
    RowVector h = RowVector::Zero(H), c = RowVector::Zero(H);
    Matrix mu(T, mc.z_dim), lv(T, mc.z_dim), z(T, mc.z_dim);
    std::vector<double> kl(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      plain_step(mc.cell, p["encoder.W"], p["encoder.U"], p["encoder.b"], p["embedding"].row(s[t]), h, c);
      mu.row(t) = h * p["posterior.mu.W"] + p["posterior.mu.b"];
      lv.row(t) = h * p["posterior.logvar.W"] + p["posterior.logvar.b"];
      double k = 0.0;
      for (Eigen::Index d = 0; d < mc.z_dim; ++d) {
        k += 0.5 * (mu(t, d) * mu(t, d) + std::exp(lv(t, d)) - 1.0 - lv(t, d));
        z(t, d) = mu(t, d) + std::exp(0.5 * lv(t, d)) * eps(t * B + bi, d);
      }
      kl[static_cast<std::size_t>(t)] = k;
    }
    const int reg = mc.variant == ElboVariant::Basic
                        ? 1
                        : std::max(1, static_cast<int>(std::ceil(mc.reg_fraction * T - 1e-9)));
    double kl_sum = 0.0;
    for (int t = T - reg; t < T; ++t) kl_sum += kl[static_cast<std::size_t>(t)];
    out.kl_avg += kl_sum / reg / B;

    RowVector zin = RowVector::Zero(mc.z_dim);
    if (mc.combine == CombineMode::Final) zin = z.row(T - 1);
    for (int t = 0; mc.combine != CombineMode::Final && t < T; ++t) zin += z.row(t);
    if (mc.combine == CombineMode::Mean) zin /= T;

    RowVector dh = zin * p["decoder.init_h.W"] + p["decoder.init_h.b"];
    RowVector dc = RowVector::Zero(H);
    if (mc.cell == CellFamily::Lstm) dc = zin * p["decoder.init_c.W"] + p["decoder.init_c.b"];
    double nll = 0.0;
    for (int t = 0; t <= T; ++t) {
      const int in = t == 0 ? Vocab::kBos : s[t - 1];
      const int target = t == T ? Vocab::kEos : s[t];
      plain_step(mc.cell, p["decoder.W"], p["decoder.U"], p["decoder.b"], p["embedding"].row(in), dh, dc);
      const RowVector logits = dh * p["output.W"] + p["output.b"];
      const double top = logits.maxCoeff();
      nll += top + std::log((logits.array() - top).exp().sum()) - logits(target);
    }
    out.recon += nll / B;
  }
  out.objective = out.recon + beta * out.kl_avg;
  return out;
}

SentenceVae toy_model(CellFamily f, ElboVariant v, CombineMode m, double rho,
                      std::uint64_t seed = 3, int mc = 1) {
  ModelConfig c;
  c.cell = f;
  c.embed_dim = 4;
  c.hidden_dim = 5;
  c.z_dim = 3;
  c.vocab_size = 12;
  c.variant = v;
  c.combine = m;
  c.reg_fraction = rho;
  c.mc_samples = mc;
  Rng init(seed);
  SentenceVae model(c, init);
  // Larger weights than the default init so every term is far from trivial.
  Rng big(seed + 100);
  for (Matrix& w : model.parameters().values()) w = big.uniform_matrix(w.rows(), w.cols(), -0.6, 0.6);
  return model;
}

ElboBreakdown run_elbo(const SentenceVae& model, const Batch& batch, double beta, Rng& rng) {
  Tape tape;
  const auto vars = model.bind(tape);
  return model.compute_elbo(tape, vars, batch, beta, rng);
}

const std::vector<Sentence> kToy = {{4, 5, 6, 7, 8, 9, 10, 11}, {6, 4, 11, 5, 7}};

}  // namespace

TEST_CASE("posterior heads") {
  Tape t;
  PosteriorHead zero{t.constant(Matrix::Zero(3, 2)), t.constant(Matrix::Zero(1, 2)),
                     t.constant(Matrix::Zero(3, 2)), t.constant(Matrix::Zero(1, 2))};
  const GaussianVars g = posterior_params(t, zero, t.constant(Matrix::Ones(1, 3)));
  CHECK(t.value(g.mu).isZero(0.0));
  CHECK(t.value(g.log_var).isZero(0.0));

  PosteriorHead id{t.constant(Matrix::Ones(1, 1)), t.constant(Matrix::Zero(1, 1)),
                   t.constant(Matrix::Ones(1, 1)), t.constant(Matrix::Zero(1, 1))};
  CHECK(t.value(posterior_params(t, id, t.constant(Matrix::Constant(1, 1, 0.7))).mu)(0, 0) == 0.7);

  Rng rng(4);
  const Matrix W = rng.uniform_matrix(4, 2, -1, 1), b = rng.uniform_matrix(1, 2, -1, 1);
  const Matrix h = rng.uniform_matrix(1, 4, -1, 1);
  PosteriorHead r{t.constant(W), t.constant(b), t.constant(W), t.constant(b)};
  const Matrix& mu = t.value(posterior_params(t, r, t.constant(h)).mu);
  for (int k = 0; k < 2; ++k) {
    double want = b(0, k);
    for (int i = 0; i < 4; ++i) want += h(0, i) * W(i, k);
    CHECK(mu(0, k) == doctest::Approx(want).epsilon(1e-15));
  }
  CHECK_THROWS_AS(posterior_params(t, r, t.constant(Matrix::Ones(1, 3))), std::invalid_argument);
}

TEST_CASE("reparameterisation") {
  Tape t;
  const Var mu = t.leaf(Matrix::Constant(1, 1, 0.3));
  const Var lv0 = t.leaf(Matrix::Zero(1, 1));
  CHECK(t.value(reparameterize(t, mu, lv0, Matrix::Zero(1, 1)))(0, 0) == 0.3);
  CHECK(t.value(reparameterize(t, mu, lv0, Matrix::Constant(1, 1, 1.5)))(0, 0) == doctest::Approx(1.8));
  const Var zero = t.leaf(Matrix::Zero(1, 1));
  const Var lv4 = t.leaf(Matrix::Constant(1, 1, std::log(4.0)));
  const Var z = reparameterize(t, zero, lv4, Matrix::Ones(1, 1));
  CHECK(t.value(z)(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  // d z / d mu = 1, d z / d lv = 0.5 * sigma * eps
  const Gradients g = t.backward(t.sum(z));
  CHECK(g[zero](0, 0) == 1.0);
  CHECK(g[lv4](0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("closed-form KL") {
  CHECK(kl_standard_normal(RowVector::Zero(3), RowVector::Zero(3)) == 0.0);
  CHECK(kl_standard_normal(RowVector::Ones(1), RowVector::Zero(1)) == 0.5);
  Tape t;
  const Var k = kl_standard_normal(t, t.constant(Matrix::Ones(2, 1)), t.constant(Matrix::Zero(2, 1)));
  CHECK(t.value(k)(1, 0) == 0.5);
  // Non-negative everywhere.
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const RowVector mu = rng.uniform_matrix(1, 4, -3, 3), lv = rng.uniform_matrix(1, 4, -4, 4);
    CHECK(kl_standard_normal(mu, lv) >= 0.0);
  }
}

TEST_CASE("KL agrees with a Monte Carlo estimate") {
  Rng rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const RowVector mu = rng.uniform_matrix(1, 3, -1.5, 1.5);
    const RowVector lv = rng.uniform_matrix(1, 3, -1.0, 1.0);
    const double exact = kl_standard_normal(mu, lv);
    Rng draw(100 + trial);
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      RowVector z(3);
      for (int d = 0; d < 3; ++d) z(d) = mu(d) + std::exp(0.5 * lv(d)) * draw.normal();
      acc += log_normal_density(z, mu, lv) - log_standard_normal_density(z);
    }
    CHECK(std::abs(acc / n - exact) / exact < 0.01);
  }
}

TEST_CASE("objective equals a straight-line recomputation") {
  const Batch batch = make_batch(kToy);
  for (CellFamily f : {CellFamily::Rnn, CellFamily::Gru, CellFamily::Lstm}) {
    for (ElboVariant v : {ElboVariant::Basic, ElboVariant::Twr}) {
      for (CombineMode m : {CombineMode::Final, CombineMode::Mean, CombineMode::Sum}) {
        for (double rho : {0.25, 1.0}) {
          const SentenceVae model = toy_model(f, v, m, rho);
          Rng rng(77);
          const ElboBreakdown e = run_elbo(model, batch, 0.7, rng);
          Rng replay(77);
          const Matrix eps = replay.normal_matrix(batch.size() * batch.max_length(), 3);
          const PlainElbo want = plain_elbo(model, kToy, eps, 0.7);
          CAPTURE(to_string(f));
          CAPTURE(to_string(v));
          CAPTURE(to_string(m));
          CAPTURE(rho);
          CHECK(std::abs(e.objective - want.objective) < 1e-12);
          CHECK(std::abs(e.recon - want.recon) < 1e-12);
          CHECK(std::abs(e.kl_avg - want.kl_avg) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("breakdown invariants") {
  const Batch batch = make_batch(kToy);
  const SentenceVae model = toy_model(CellFamily::Gru, ElboVariant::Twr, CombineMode::Final, 1.0);
  Rng rng(1);
  const ElboBreakdown e = run_elbo(model, batch, 0.5, rng);
  CHECK(e.kl_per_step.size() == 8);
  for (double k : e.kl_per_step) CHECK(k >= 0.0);
  CHECK(e.objective == doctest::Approx(e.recon + 0.5 * e.kl_avg).epsilon(1e-14));
  // Single-sentence batch: kl_avg is the plain mean of the per-step KLs.
  const std::vector<Sentence> one = {kToy[1]};
  Rng rng2(1);
  const ElboBreakdown s = run_elbo(model, make_batch(one), 1.0, rng2);
  double mean = 0.0;
  for (double k : s.kl_per_step) mean += k / 5.0;
  CHECK(s.kl_avg == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("length-one sentences make basic and twr identical") {
  const std::vector<Sentence> s = {{5}, {7}};
  const Batch batch = make_batch(s);
  const SentenceVae basic = toy_model(CellFamily::Lstm, ElboVariant::Basic, CombineMode::Mean, 1.0);
  const SentenceVae twr = toy_model(CellFamily::Lstm, ElboVariant::Twr, CombineMode::Mean, 1.0);
  Rng a(5), b(5);
  const ElboBreakdown x = run_elbo(basic, batch, 1.0, a);
  const ElboBreakdown y = run_elbo(twr, batch, 1.0, b);
  CHECK(x.objective == y.objective);
  CHECK(x.kl_avg == y.kl_avg);
}

TEST_CASE("rho small enough to keep one step reproduces the basic KL") {
  const Batch batch = make_batch(kToy);
  const SentenceVae basic = toy_model(CellFamily::Gru, ElboVariant::Basic, CombineMode::Final, 1.0);
  const SentenceVae twr = toy_model(CellFamily::Gru, ElboVariant::Twr, CombineMode::Final, 0.1);
  CHECK(regularised_steps(ElboVariant::Twr, 0.1, 8) == 1);
  Rng a(5), b(5);
  CHECK(run_elbo(basic, batch, 1.0, a).kl_avg == run_elbo(twr, batch, 1.0, b).kl_avg);
}

TEST_CASE("regularised step counts") {
  CHECK(regularised_steps(ElboVariant::Basic, 0.5, 10) == 1);
  CHECK(regularised_steps(ElboVariant::Twr, 1.0, 10) == 10);
  CHECK(regularised_steps(ElboVariant::Twr, 0.25, 10) == 3);
  CHECK(regularised_steps(ElboVariant::Twr, 0.5, 5) == 3);
  CHECK(regularised_steps(ElboVariant::Twr, 0.1, 30) == 3);
  CHECK_THROWS_AS(regularised_steps(ElboVariant::Twr, 0.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(regularised_steps(ElboVariant::Twr, 1.5, 5), std::invalid_argument);
  ModelConfig c;
  c.vocab_size = 10;
  c.reg_fraction = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("M samples average M single-sample objectives") {
  const Batch batch = make_batch(kToy);
  const SentenceVae one = toy_model(CellFamily::Lstm, ElboVariant::Twr, CombineMode::Sum, 0.5, 3, 1);
  SentenceVae two = toy_model(CellFamily::Lstm, ElboVariant::Twr, CombineMode::Sum, 0.5, 3, 2);
  Rng r(8);
  const double a = run_elbo(one, batch, 1.0, r).objective;
  const double b = run_elbo(one, batch, 1.0, r).objective;
  Rng r2(8);
  CHECK(run_elbo(two, batch, 1.0, r2).objective == doctest::Approx((a + b) / 2).epsilon(1e-13));
}

TEST_CASE("combining latents") {
  Matrix same(4, 3);
  for (int t = 0; t < 4; ++t) same.row(t) << 0.1, -0.2, 0.7;
  CHECK(combine_latents(same, CombineMode::Mean) == combine_latents(same, CombineMode::Final));
  const Matrix z = Rng(3).uniform_matrix(5, 3, -1, 1);
  const RowVector diff = combine_latents(z, CombineMode::Mean) * 5.0 - combine_latents(z, CombineMode::Sum);
  CHECK(diff.cwiseAbs().maxCoeff() < 1e-15);

  PosteriorSequence post{Rng(4).uniform_matrix(3, 2, -1, 1), Rng(5).uniform_matrix(3, 2, -1, 1)};
  const DiagGaussian f = decoder_input_posterior(post, CombineMode::Final);
  CHECK(f.mu == RowVector(post.mu.row(2)));
  const DiagGaussian s = decoder_input_posterior(post, CombineMode::Sum);
  const DiagGaussian m = decoder_input_posterior(post, CombineMode::Mean);
  for (int d = 0; d < 2; ++d) {
    const double var = post.log_var.col(d).array().exp().sum();
    CHECK(std::exp(s.log_var(d)) == doctest::Approx(var).epsilon(1e-14));
    CHECK(std::exp(m.log_var(d)) == doctest::Approx(var / 9.0).epsilon(1e-14));
    CHECK(m.mu(d) * 3.0 == doctest::Approx(s.mu(d)).epsilon(1e-14));
  }
}

TEST_CASE("annealing schedules") {
  CHECK(anneal_weight(AnnealSchedule::Constant, 0, 100) == 1.0);
  CHECK(anneal_weight(AnnealSchedule::Constant, 77, 100) == 1.0);
  CHECK(anneal_weight(AnnealSchedule::Linear, 0, 100, 1, 0.5) == 0.0);
  CHECK(anneal_weight(AnnealSchedule::Linear, 25, 100, 1, 0.5) == 0.5);
  CHECK(anneal_weight(AnnealSchedule::Linear, 50, 100, 1, 0.5) == 1.0);
  CHECK(anneal_weight(AnnealSchedule::Linear, 90, 100, 1, 0.5) == 1.0);
  // one period of 100 steps
  CHECK(anneal_weight(AnnealSchedule::Cyclical, 25, 100, 1, 0.5) == 0.5);
  CHECK(anneal_weight(AnnealSchedule::Cyclical, 75, 100, 1, 0.5) == 1.0);
  // four periods of 100 steps
  CHECK(anneal_weight(AnnealSchedule::Cyclical, 125, 400, 4, 0.5) == 0.5);
  CHECK(anneal_weight(AnnealSchedule::Cyclical, 200, 400, 4, 0.5) == 0.0);
  CHECK_THROWS_AS(anneal_weight(AnnealSchedule::Cyclical, 1, 100, 0), std::invalid_argument);
  CHECK_THROWS_AS(anneal_weight(AnnealSchedule::Linear, -1, 100), std::invalid_argument);
}

TEST_CASE("greedy generation") {
  const SentenceVae model = toy_model(CellFamily::Gru, ElboVariant::Twr, CombineMode::Final, 1.0);
  const RowVector z = Rng(9).uniform_matrix(1, 3, -1, 1);
  const Sentence a = model.generate_greedy(z, 12);
  CHECK(a == model.generate_greedy(z, 12));
  CHECK(a.size() <= 12);

  SentenceVae eos = model;
  eos.parameters()["output.b"](0, Vocab::kEos) = 100.0;
  CHECK(eos.generate_greedy(z, 12).empty());
  CHECK_THROWS_AS(model.generate_greedy(RowVector(RowVector::Zero(2)), 5), std::invalid_argument);
}
