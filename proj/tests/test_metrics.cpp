#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "twr/gaussian.hpp"
#include "twr/lm_metrics.hpp"
#include "twr/text_metrics.hpp"

using namespace twr;

namespace {

using Tokens = std::vector<std::string>;

Tokens words(const std::string& s) {
  std::istringstream in(s);
  Tokens out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double normal_pdf(double z, double mu) {
  return std::exp(-0.5 * (z - mu) * (z - mu)) / std::sqrt(2 * std::numbers::pi);
}

SentenceVae tiny_model(bool zero) {
  ModelConfig c;
  c.cell = CellFamily::Lstm;
  c.embed_dim = 4;
  c.hidden_dim = 6;
  c.z_dim = 2;
  c.vocab_size = 9;
  Rng init(3);
  SentenceVae m(c, init);
  Rng big(4);
  for (Matrix& w : m.parameters().values()) {
    w = zero ? Matrix::Zero(w.rows(), w.cols()) : big.uniform_matrix(w.rows(), w.cols(), -0.7, 0.7);
  }
  return m;
}

const std::vector<Sentence> kCorpus = {{4, 5, 6}, {7, 8}, {4, 4, 8, 6, 5}, {5}};

}  // namespace

TEST_CASE("rouge") {
  const Tokens hyp = words("the cat sat"), ref = words("the cat");
  CHECK(std::abs(rouge_f1(hyp, ref, RougeKind::One) - 0.8) < 1e-12);
  CHECK(std::abs(rouge_f1(hyp, ref, RougeKind::Two) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(rouge_f1(hyp, ref, RougeKind::L) - 0.8) < 1e-12);
  for (RougeKind k : {RougeKind::One, RougeKind::Two, RougeKind::L}) {
    CHECK(rouge_f1(hyp, hyp, k) == 1.0);
    CHECK(rouge_f1(hyp, words("dog ran off"), k) == 0.0);
    CHECK(rouge_f1(Tokens{}, ref, k) == 0.0);
  }
  // LCS is order-aware, unigram overlap is not.
  CHECK(rouge_f1(words("a b c"), words("c b a"), RougeKind::One) == 1.0);
  CHECK(std::abs(rouge_f1(words("a b c"), words("c b a"), RougeKind::L) - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("bleu") {
  const Tokens ref = words("i like green tea");
  CHECK(std::abs(sentence_bleu(ref, {ref}) - 1.0) < 1e-12);
  CHECK(sentence_bleu(words("no way out"), {ref}) == 0.0);
  CHECK(sentence_bleu(Tokens{}, {ref}) == 0.0);

  const BleuScores s = bleu_prf(std::vector<Tokens>{ref, words("no way out")}, {ref});
  CHECK(std::abs(s.recall - 1.0) < 1e-9);
  CHECK(std::abs(s.precision - 0.5) < 1e-9);
  CHECK(std::abs(s.f1 - 2.0 / 3.0) < 1e-9);

  // "i like tea": p1 = 1, p2 = 1/2, p3 = 1/(1+1) smoothed, BP = exp(1 - 4/3)
  const double want = std::exp(1.0 - 4.0 / 3.0) * std::cbrt(1.0 * 0.5 * 0.5);
  CHECK(std::abs(sentence_bleu(words("i like tea"), {ref}) - want) < 1e-12);
  // clipping: "tea tea tea" matches one tea
  const double clipped = std::exp(1.0 - 4.0 / 3.0) * std::cbrt((1.0 / 3.0) * (1.0 / 3.0) * 0.5);
  CHECK(std::abs(sentence_bleu(words("tea tea tea"), {ref}) - clipped) < 1e-12);
}

TEST_CASE("distinct n-grams") {
  const DistScores a = dist_scores(std::vector<Tokens>{words("a a b")});
  CHECK(std::abs(a.intra_dist1 - 2.0 / 3.0) < 1e-12);
  CHECK(a.intra_dist2 == 1.0);
  const DistScores b = dist_scores(std::vector<Tokens>{words("a b"), words("a b")});
  CHECK(b.inter_dist1 == 0.5);
  CHECK(b.intra_dist1 == 1.0);
  CHECK(b.inter_dist2 == 0.5);
  // a one-token response has no bigrams and is left out of dist-2
  const DistScores c = dist_scores(std::vector<Tokens>{words("x"), words("y z")});
  CHECK(c.intra_dist2 == 1.0);
  CHECK(c.intra_dist1 == 1.0);
  CHECK(dist_scores(std::vector<Tokens>{words("u v w"), words("x y")}).intra_dist1 == 1.0);
}

TEST_CASE("bag-of-words embedding similarity") {
  Matrix e(3, 2);
  e << 1, 0,
       0, 1,
       -1, 0;
  const std::vector<int> resp = {0, 1}, ref = {0};
  const BowScores s = bow_embedding_scores(resp, ref, e);
  CHECK(std::abs(s.average - std::sqrt(0.5)) < 1e-12);
  CHECK(std::abs(s.greedy - 0.5) < 1e-12);
  CHECK(std::abs(s.extreme - std::sqrt(0.5)) < 1e-12);

  const BowScores same = bow_embedding_scores(resp, resp, e);
  CHECK(std::abs(same.average - 1.0) < 1e-12);
  CHECK(std::abs(same.greedy - 1.0) < 1e-12);
  CHECK(std::abs(same.extreme - 1.0) < 1e-12);

  const std::vector<int> x = {0}, y = {1};
  const BowScores orth = bow_embedding_scores(x, y, e);
  CHECK(orth.average == 0.0);
  CHECK(orth.greedy == 0.0);
  CHECK(orth.extreme == 0.0);

  CHECK(cosine(RowVector::Zero(2), RowVector::Ones(2)) == 0.0);
  // extreme keeps the sign of the largest magnitude
  const std::vector<int> neg = {2, 1};
  CHECK(std::abs(bow_embedding_scores(neg, std::vector<int>{2}, e).extreme - std::sqrt(0.5)) < 1e-12);
}

TEST_CASE("overlap metrics ignore token identity") {
  const std::vector<int> hyp = {3, 4, 5, 3, 6}, ref = {4, 5, 3, 7};
  auto relabel = [](std::vector<int> v) {
    for (int& t : v) t = 100 - 7 * t;
    return v;
  };
  for (RougeKind k : {RougeKind::One, RougeKind::Two, RougeKind::L}) {
    CHECK(rouge_f1(hyp, ref, k) == rouge_f1(relabel(hyp), relabel(ref), k));
  }
  const std::vector<std::vector<int>> resp = {hyp, {4, 5}}, refs = {ref, {3, 3, 6}};
  const std::vector<std::vector<int>> resp2 = {relabel(hyp), relabel({4, 5})};
  const std::vector<std::vector<int>> refs2 = {relabel(ref), relabel({3, 3, 6})};
  CHECK(bleu_prf(resp, refs).f1 == bleu_prf(resp2, refs2).f1);
  CHECK(dist_scores(resp).inter_dist2 == dist_scores(resp2).inter_dist2);
}

TEST_CASE("perplexity of a uniform model is the vocabulary size") {
  CHECK(perplexity(0.0, 10) == 1.0);
  CHECK(std::abs(perplexity(10 * std::log(7.0), 10) - 7.0) < 1e-12);
  const SentenceVae m = tiny_model(true);
  for (NllMode mode : {NllMode::ElboBound, NllMode::ImportanceWeighted}) {
    Rng rng(1);
    const NllEstimate e = estimate_nll_ppl(m, kCorpus, NllEstimator{mode, 5}, rng);
    CHECK(e.tokens == 15);
    CHECK(std::abs(e.ppl - 9.0) < 1e-9);
    CHECK(std::abs(e.per_sentence[0] - 4 * std::log(9.0)) < 1e-9);
  }
}

TEST_CASE("importance-weighted NLL does not exceed the bound") {
  const SentenceVae m = tiny_model(false);
  Rng a(2), b(3), c(4);
  const double bound = estimate_nll_ppl(m, kCorpus, NllEstimator{NllMode::ElboBound, 2000}, a).nll;
  const double k10 = estimate_nll_ppl(m, kCorpus, NllEstimator{NllMode::ImportanceWeighted, 10}, b).nll;
  const double k500 = estimate_nll_ppl(m, kCorpus, NllEstimator{NllMode::ImportanceWeighted, 500}, c).nll;
  CHECK(k500 <= bound + 1e-3);
  CHECK(k500 <= k10 + 1e-3);
}

TEST_CASE("mutual information: two 1-d posteriors against quadrature") {
  const std::vector<DiagGaussian> post = {
      {RowVector::Constant(1, -1.0), RowVector::Zero(1)},
      {RowVector::Constant(1, 1.0), RowVector::Zero(1)}};
  // I = E_x KL(q(z|x) || p) - KL(q(z) || p), q(z) the equal mixture.
  double agg = 0.0;
  const double h = 1e-4;
  for (double z = -14.0; z <= 14.0; z += h) {
    const double q = 0.5 * (normal_pdf(z, -1.0) + normal_pdf(z, 1.0));
    agg += h * q * std::log(q / normal_pdf(z, 0.0));
  }
  const double oracle = 0.5 - agg;
  Rng rng(5);
  const MiEstimate mi = mutual_information(post, 200000, rng);
  CHECK(mi.mean_kl == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(mi.mi - oracle) / oracle < 0.02);
  CHECK(mi.mi <= mi.mean_kl + 3 * mi.std_error);
}

TEST_CASE("mutual information of posteriors equal to the prior is zero") {
  const std::vector<DiagGaussian> post(4, DiagGaussian{RowVector::Zero(3), RowVector::Zero(3)});
  Rng rng(6);
  const MiEstimate mi = mutual_information(post, 100, rng);
  CHECK(mi.mean_kl == 0.0);
  CHECK(std::abs(mi.mi) < 1e-12);
}

TEST_CASE("mutual information stays below the mean KL") {
  Rng g(7);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<DiagGaussian> post;
    for (int i = 0; i < 30; ++i) {
      post.push_back({g.uniform_matrix(1, 3, -2, 2), g.uniform_matrix(1, 3, -2, 1)});
    }
    Rng rng(10 + trial);
    const MiEstimate mi = mutual_information(post, 50, rng);
    CHECK(mi.mi <= mi.mean_kl + 3 * mi.std_error);
    CHECK(mi.mi >= -3 * mi.std_error);
  }
  const SentenceVae m = tiny_model(false);
  Rng rng(8);
  const MiEstimate mi = mutual_information(m, kCorpus, 4, 200, rng);
  CHECK(mi.mi <= mi.mean_kl + 3 * mi.std_error);
}
