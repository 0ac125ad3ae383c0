// Writes the synthetic corpora used by the examples and the acceptance runs:
//   <dir>/templated.{train,valid,test}.txt   one sentence per line
//   <dir>/dialogues.{train,valid,test}.txt   tab-separated utterances

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "twr/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

void write_lines(const fs::path& path, const std::vector<std::string>& lines, std::size_t from,
                 std::size_t count) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = from; i < from + count && i < lines.size(); ++i) out << lines[i] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic corpora"};
  std::string dir = "data";
  std::uint64_t seed = 1;
  std::size_t sentences = 2000;
  std::size_t dialogues = 500;
  app.add_option("--dir", dir);
  app.add_option("--seed", seed);
  app.add_option("--sentences", sentences, "training sentences (valid/test get a tenth each)");
  app.add_option("--dialogues", dialogues, "training dialogues (valid/test get a fifth each)");
  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(dir);
    twr::Rng rng(twr::derive_seed(seed, "templated"));
    const std::size_t s_held = sentences / 10;
    const auto lines = twr::templated_corpus(sentences + 2 * s_held, rng);
    write_lines(fs::path(dir) / "templated.train.txt", lines, 0, sentences);
    write_lines(fs::path(dir) / "templated.valid.txt", lines, sentences, s_held);
    write_lines(fs::path(dir) / "templated.test.txt", lines, sentences + s_held, s_held);

    twr::Rng drng(twr::derive_seed(seed, "dialogues"));
    const std::size_t d_held = dialogues / 5;
    const auto convs = twr::scripted_dialogues(dialogues + 2 * d_held, drng);
    write_lines(fs::path(dir) / "dialogues.train.txt", convs, 0, dialogues);
    write_lines(fs::path(dir) / "dialogues.valid.txt", convs, dialogues, d_held);
    write_lines(fs::path(dir) / "dialogues.test.txt", convs, dialogues + d_held, d_held);
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
