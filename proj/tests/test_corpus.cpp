#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "twr/corpus.hpp"
#include "twr/vae.hpp"

using namespace twr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "twrvae_test_corpus";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("vocabulary ranking and truncation") {
  const std::vector<std::string> lines = {"a b", "a"};
  const Vocab v = build_vocab(lines, 10);
  REQUIRE(v.size() == 6);
  CHECK(v.token(0) == "<pad>");
  CHECK(v.token(3) == "<eos>");
  CHECK(v.token(4) == "a");
  CHECK(v.token(5) == "b");

  const Vocab small = build_vocab(lines, 5);
  CHECK(small.size() == 5);
  CHECK(small.contains("a"));
  CHECK(small.id("b") == Vocab::kUnk);

  const std::vector<std::string> tie = {"zeta beta", "alpha"};
  const Vocab t = build_vocab(tie, 10);
  CHECK(t.id("alpha") < t.id("beta"));
  CHECK(t.id("beta") < t.id("zeta"));

  const std::vector<std::string> rare = {"x y y"};
  CHECK_FALSE(build_vocab(rare, 10, 2).contains("x"));

  const std::vector<std::string> empty = {"", "  "};
  CHECK_THROWS_AS(build_vocab(empty, 10), std::invalid_argument);
  CHECK_THROWS_WITH(build_vocab(fs::path("/nonexistent/corpus.txt"), 10),
                    doctest::Contains("/nonexistent/corpus.txt"));
}

TEST_CASE("encode and decode") {
  const std::vector<std::string> lines = {"a b", "a"};
  const Vocab v = build_vocab(lines, 10);
  const Sentence s = encode_sentence(v, "a b");
  CHECK(s == Sentence{Vocab::kBos, v.id("a"), v.id("b"), Vocab::kEos});
  CHECK(decode_ids(v, s) == "a b");
  CHECK(encode_tokens(v, "q")[0] == Vocab::kUnk);
  CHECK(decode_ids(v, Sentence{v.id("a"), Vocab::kUnk}) == "a <unk>");
}

TEST_CASE("vocab file round trip and hash") {
  const std::vector<std::string> lines = {"the cat", "the dog"};
  const Vocab v = build_vocab(lines, 100);
  const fs::path p = scratch("vocab.txt");
  save_vocab(v, p);
  const Vocab back = load_vocab(p);
  CHECK(back.size() == v.size());
  CHECK(back.hash() == v.hash());
  const std::vector<std::string> other = {"the cow"};
  CHECK(build_vocab(other, 100).hash() != v.hash());
}

TEST_CASE("batches") {
  const std::vector<Sentence> corpus = {{4, 5, 6}, {7, 8, 9, 10, 11}, {4}};

  SUBCASE("sizes") {
    Rng rng(1);
    const auto batches = make_batches(corpus, 2, rng);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].size() == 2);
    CHECK(batches[1].size() == 1);
  }
  SUBCASE("per-batch padding") {
    const std::vector<std::size_t> rows = {0, 1};
    const Batch b = make_batch(corpus, rows);
    CHECK(b.max_length() == 5);
    CHECK(b.ids(0, 3) == Vocab::kPad);
    CHECK(b.ids(0, 4) == Vocab::kPad);
    CHECK(b.ids(0, 2) == 6);
    CHECK(b.is_pad(0, 3));
    CHECK_FALSE(b.is_pad(1, 4));
  }
  SUBCASE("same seed gives the same order") {
    Rng a(9), b(9);
    const auto x = make_batches(corpus, 1, a);
    const auto y = make_batches(corpus, 1, b);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].source == y[i].source);
  }
  SUBCASE("every sentence once, token multiset unchanged") {
    std::vector<Sentence> big;
    Rng g(3);
    for (int i = 0; i < 37; ++i) {
      Sentence s;
      for (std::uint64_t k = 0; k < 1 + g.below(6); ++k) s.push_back(4 + static_cast<int>(g.below(20)));
      big.push_back(s);
    }
    std::map<int, int> want;
    for (const auto& s : big)
      for (int id : s) ++want[id];
    Rng rng(5);
    std::vector<std::size_t> seen;
    std::map<int, int> got;
    for (const auto& b : make_batches(big, 8, rng)) {
      for (Eigen::Index r = 0; r < b.size(); ++r) {
        seen.push_back(b.source[static_cast<std::size_t>(r)]);
        for (int t = 0; t < b.lengths[static_cast<std::size_t>(r)]; ++t) ++got[b.ids(r, t)];
      }
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);
    CHECK(got == want);
  }
  CHECK_THROWS_AS(make_ordered_batches(corpus, 0), std::invalid_argument);
}

TEST_CASE("embedding files") {
  const std::vector<std::string> lines = {"a b"};
  const Vocab v = build_vocab(lines, 10);
  Rng rng(2);

  const fs::path full = scratch("full.vec");
  write_file(full, "2 3\na 1 2 3\nb 4 5 6\nextra 0 0 0\n");
  const EmbeddingTable t = load_embeddings(full, v, 3, rng);
  CHECK(t.coverage == 1.0);
  CHECK(t.values(v.id("b"), 2) == 6.0);

  const fs::path empty = scratch("empty.vec");
  write_file(empty, "");
  const EmbeddingTable e = load_embeddings(empty, v, 3, rng);
  CHECK(e.coverage == 0.0);
  CHECK(e.values.cwiseAbs().maxCoeff() <= 0.08);

  const fs::path bad = scratch("bad.vec");
  write_file(bad, "a 1 2 3\nb 4 5\n");
  CHECK_THROWS_WITH_AS(load_embeddings(bad, v, 3, rng), doctest::Contains(":2:"),
                       std::invalid_argument);
}

TEST_CASE("dialogue lines split on tabs") {
  const auto u = split_utterances("hi there\thello\thow are you");
  REQUIRE(u.size() == 3);
  CHECK(u[1] == "hello");
  const fs::path p = scratch("dlg.txt");
  write_file(p, "a\tb\n\nc\td\te\n");
  const auto d = read_dialogues(p);
  REQUIRE(d.size() == 2);
  CHECK(d[1].size() == 3);
}

TEST_CASE("pad positions receive exactly zero gradient") {
  for (CellFamily f : {CellFamily::Rnn, CellFamily::Gru, CellFamily::Lstm}) {
    for (ElboVariant var : {ElboVariant::Basic, ElboVariant::Twr}) {
      ModelConfig mc;
      mc.cell = f;
      mc.embed_dim = 4;
      mc.hidden_dim = 5;
      mc.z_dim = 3;
      mc.vocab_size = 12;
      mc.variant = var;
      mc.combine = CombineMode::Mean;
      Rng init(1);
      const SentenceVae model(mc, init);
      const std::vector<Sentence> s = {{4, 5, 6, 7, 8}, {9, 10}};
      const Batch batch = make_batch(s);
      Tape tape;
      const auto vars = model.bind(tape);
      Rng noise(2);
      const Gradients g = tape.backward(model.compute_elbo(tape, vars, batch, 1.0, noise).loss);
      const Matrix& ge = g[vars.embedding];
      CHECK(ge.row(Vocab::kPad).isZero(0.0));
      CHECK_FALSE(ge.row(4).isZero(0.0));
    }
  }
}
