#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "twr/interpolation.hpp"

using namespace twr;

namespace {

SentenceVae toy_model() {
  ModelConfig c;
  c.cell = CellFamily::Gru;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  c.z_dim = 3;
  c.vocab_size = 10;
  Rng init(2);
  SentenceVae m(c, init);
  Rng big(5);
  for (Matrix& w : m.parameters().values()) w = big.uniform_matrix(w.rows(), w.cols(), -1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("interpolate_latents") {
  const RowVector a = Rng(1).uniform_matrix(1, 4, -3, 3);
  const RowVector b = Rng(2).uniform_matrix(1, 4, -3, 3);
  CHECK(interpolate_latents(a, b, 0.0) == a);
  CHECK(interpolate_latents(a, b, 1.0) == b);
  const RowVector mid = interpolate_latents(a, b, 0.5);
  CHECK(((mid - (a + b) / 2).cwiseAbs().maxCoeff()) < 1e-15);
  for (double alpha : default_alphas()) {
    const RowVector fwd = interpolate_latents(a, b, alpha);
    const RowVector rev = interpolate_latents(b, a, 1.0 - alpha);
    CHECK((fwd - rev).cwiseAbs().maxCoeff() < 1e-14);
  }
  CHECK(interpolate_latents(a, a, 0.3) == a);
  CHECK_THROWS_AS(interpolate_latents(a, b, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(interpolate_latents(a, b, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(interpolate_latents(a, RowVector::Zero(3), 0.5), std::invalid_argument);
}

TEST_CASE("default alpha grid") {
  const auto a = default_alphas();
  REQUIRE(a.size() == 11);
  CHECK(a.front() == 0.0);
  CHECK(a[3] == 0.3);
  CHECK(a.back() == 1.0);
}

TEST_CASE("sweep endpoints use the latent codes exactly") {
  const SentenceVae m = toy_model();
  const Sentence s1 = {4, 5, 6, 7}, s2 = {8, 9, 4};
  const auto alphas = default_alphas();
  Rng rng(1);
  const InterpolationSweep sw = interpolation_sweep(m, s1, s2, alphas, LatentSource::PosteriorMean, rng);
  REQUIRE(sw.points.size() == 11);
  CHECK(sw.points.front().z == sw.z1);
  CHECK(sw.points.back().z == sw.z2);

  const std::vector<Sentence> pair = {s1, s2};
  Rng r2(9);
  const auto codes = latent_codes(m, pair, LatentSource::PosteriorMean, r2);
  CHECK(codes[0] == sw.z1);
  CHECK(codes[1] == sw.z2);

  // the alpha = 0 score is the plain reconstruction score of the first sentence
  const RougeTriple rec = rouge_all(m.generate_greedy(sw.z1, 40), s1);
  CHECK(sw.points.front().vs_first.r1 == rec.r1);
  CHECK(sw.points.front().vs_first.rl == rec.rl);
}

TEST_CASE("posterior-mean sweeps are deterministic") {
  const SentenceVae m = toy_model();
  const Sentence s1 = {4, 5, 6}, s2 = {7, 7, 8, 9};
  const auto alphas = default_alphas();
  Rng a(1), b(2);
  const auto x = interpolation_sweep(m, s1, s2, alphas, LatentSource::PosteriorMean, a);
  const auto y = interpolation_sweep(m, s1, s2, alphas, LatentSource::PosteriorMean, b);
  for (std::size_t i = 0; i < x.points.size(); ++i) CHECK(x.points[i].decoded == y.points[i].decoded);
}

TEST_CASE("identical endpoints decode identically at every alpha") {
  const SentenceVae m = toy_model();
  const Sentence s = {4, 6, 8};
  const auto alphas = default_alphas();
  Rng rng(3);
  const auto sw = interpolation_sweep(m, s, s, alphas, LatentSource::PosteriorMean, rng);
  for (const auto& p : sw.points) CHECK(p.decoded == sw.points.front().decoded);
}

TEST_CASE("sweep arguments are validated") {
  const SentenceVae m = toy_model();
  const Sentence s = {4, 5};
  Rng rng(1);
  const std::vector<double> no_end = {0.0, 0.5};
  CHECK_THROWS_AS(interpolation_sweep(m, s, s, no_end, LatentSource::PosteriorMean, rng),
                  std::invalid_argument);
  const std::vector<double> unsorted = {0.0, 0.7, 0.3, 1.0};
  CHECK_THROWS_AS(interpolation_sweep(m, s, s, unsorted, LatentSource::PosteriorMean, rng),
                  std::invalid_argument);
}

TEST_CASE("corpus sweeps, mean curve and CSV") {
  const SentenceVae m = toy_model();
  const std::vector<Sentence> corpus = {{4, 5}, {6, 7, 8}, {9, 4}, {5, 5, 6}, {7}};
  const auto alphas = default_alphas(4);
  Rng rng(4);
  const auto sweeps = corpus_sweeps(m, corpus, alphas, LatentSource::PosteriorMean, rng, 10);
  REQUIRE(sweeps.size() == 2);
  CHECK(sweeps[1].first == corpus[2]);
  const AlphaCurve c = mean_curve(sweeps);
  REQUIRE(c.alphas.size() == 5);
  CHECK(c.vs_first[0].r1 == doctest::Approx((sweeps[0].points[0].vs_first.r1 +
                                             sweeps[1].points[0].vs_first.r1) / 2));

  std::vector<std::string> lines = {"a b c d e f"};
  const Vocab v = build_vocab(lines, 20);
  const auto path = std::filesystem::temp_directory_path() / "twrvae_test_sweeps.csv";
  write_sweeps_csv(sweeps, v, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "pair_id,alpha,decoded_text,rouge1_ref1,rouge2_ref1,rougeL_ref1,rouge1_ref2,rouge2_ref2,rougeL_ref2");
  int rows = 0;
  for (std::string l; std::getline(in, l);) ++rows;
  CHECK(rows == 10);
}
