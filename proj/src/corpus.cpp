#include "twr/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace twr {

namespace {

const char* const kSpecials[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

}  // namespace

Vocab::Vocab() {
  for (const char* s : kSpecials) {
    ids_.emplace(s, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(s);
  }
}

Vocab::Vocab(std::span<const std::string> tokens) : Vocab() {
  for (const auto& t : tokens) {
    if (ids_.count(t) != 0) {
      throw std::invalid_argument("vocab: duplicate or reserved token '" + t + "'");
    }
    ids_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
}

int Vocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& t : tokens_) {
    for (char ch : t) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001B3ULL;
    }
    h ^= 0x0A;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Vocab build_vocab(std::span<const std::string> lines, int max_size,
                  int min_count) {
  if (max_size < Vocab::kSpecialCount) {
    throw std::invalid_argument("build_vocab: max_size must be at least " +
                                std::to_string(Vocab::kSpecialCount));
  }
  std::map<std::string, long> counts;
  bool any = false;
  for (const auto& line : lines) {
    for (auto& tok : tokenize(line)) {
      any = true;
      ++counts[tok];
    }
  }
  if (!any) throw std::invalid_argument("build_vocab: empty corpus");

  std::vector<std::pair<std::string, long>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && tok != "<pad>" && tok != "<unk>" && tok != "<bos>" &&
        tok != "<eos>") {
      ranked.emplace_back(tok, n);
    }
  }
  // std::map iteration is already lexicographic; stable_sort keeps it on ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep =
      std::min(ranked.size(), static_cast<std::size_t>(max_size - Vocab::kSpecialCount));
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab(tokens);
}

Vocab build_vocab(const std::filesystem::path& corpus, int max_size,
                  int min_count) {
  const auto lines = read_lines(corpus);
  try {
    return build_vocab(lines, max_size, min_count);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(e.what()) + " (" + corpus.string() + ")");
  }
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

Vocab load_vocab(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.size() < Vocab::kSpecialCount) {
    throw std::runtime_error("vocab file " + path.string() + " is too short");
  }
  for (int i = 0; i < Vocab::kSpecialCount; ++i) {
    if (lines[static_cast<std::size_t>(i)] != kSpecials[i]) {
      throw std::runtime_error("vocab file " + path.string() +
                               ": expected special '" + kSpecials[i] +
                               "' on line " + std::to_string(i + 1));
    }
  }
  std::vector<std::string> rest(lines.begin() + Vocab::kSpecialCount, lines.end());
  while (!rest.empty() && rest.back().empty()) rest.pop_back();
  return Vocab(rest);
}

Sentence encode_tokens(const Vocab& vocab, std::string_view text) {
  Sentence out;
  for (const auto& tok : tokenize(text)) out.push_back(vocab.id(tok));
  return out;
}

Sentence encode_sentence(const Vocab& vocab, std::string_view text) {
  Sentence out{Vocab::kBos};
  for (int id : encode_tokens(vocab, text)) out.push_back(id);
  out.push_back(Vocab::kEos);
  return out;
}

std::vector<std::string> decode_tokens(const Vocab& vocab,
                                       std::span<const int> ids) {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == Vocab::kEos) break;
    if (id == Vocab::kPad || id == Vocab::kBos) continue;
    out.push_back(vocab.token(id));
  }
  return out;
}

std::string decode_ids(const Vocab& vocab, std::span<const int> ids) {
  std::string out;
  for (const auto& t : decode_tokens(vocab, ids)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<Sentence> encode_corpus(const Vocab& vocab,
                                    std::span<const std::string> lines) {
  std::vector<Sentence> out;
  for (const auto& line : lines) {
    Sentence s = encode_tokens(vocab, line);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

Batch make_batch(std::span<const Sentence> corpus,
                 std::span<const std::size_t> rows) {
  Batch b;
  int longest = 0;
  for (std::size_t r : rows) {
    longest = std::max(longest, static_cast<int>(corpus[r].size()));
  }
  b.ids = Eigen::MatrixXi::Constant(static_cast<Eigen::Index>(rows.size()), longest,
                                    Vocab::kPad);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Sentence& s = corpus[rows[i]];
    for (std::size_t t = 0; t < s.size(); ++t) {
      b.ids(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = s[t];
    }
    b.lengths.push_back(static_cast<int>(s.size()));
    b.source.push_back(rows[i]);
  }
  return b;
}

Batch make_batch(std::span<const Sentence> sentences) {
  std::vector<std::size_t> rows(sentences.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return make_batch(sentences, rows);
}

namespace {

std::vector<Batch> slice_batches(std::span<const Sentence> corpus,
                                 const std::vector<std::size_t>& order,
                                 int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<Batch> out;
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(order.size() - at, static_cast<std::size_t>(batch_size));
    out.push_back(make_batch(corpus, std::span(order).subspan(at, n)));
  }
  return out;
}

}  // namespace

std::vector<Batch> make_batches(std::span<const Sentence> corpus, int batch_size,
                                Rng& rng) {
  return slice_batches(corpus, shuffled_order(corpus.size(), rng), batch_size);
}

std::vector<Batch> make_ordered_batches(std::span<const Sentence> corpus,
                                        int batch_size) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return slice_batches(corpus, order, batch_size);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const Vocab& vocab, int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("load_embeddings: dim must be >= 1");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());

  EmbeddingTable table;
  table.values = rng.uniform_matrix(vocab.size(), dim, -0.08, 0.08);
  std::vector<char> seen(static_cast<std::size_t>(vocab.size()), 0);

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = tokenize(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      int count = 0;
      int width = 0;
      const auto& a = fields[0];
      const auto& b = fields[1];
      const bool ints =
          std::from_chars(a.data(), a.data() + a.size(), count).ec == std::errc{} &&
          std::from_chars(b.data(), b.data() + b.size(), width).ec == std::errc{};
      if (ints && width == dim) continue;
    }
    if (static_cast<int>(fields.size()) != dim + 1) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(dim) +
                                  " values, found " +
                                  std::to_string(fields.size() - 1));
    }
    RowVector row(dim);
    for (int k = 0; k < dim; ++k) {
      const auto& f = fields[static_cast<std::size_t>(k + 1)];
      double v = 0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                    ": cannot parse value '" + f + "'");
      }
      row(k) = v;
    }
    if (!vocab.contains(fields[0])) continue;
    const int id = vocab.id(fields[0]);
    table.values.row(id) = row;
    seen[static_cast<std::size_t>(id)] = 1;
  }
  const long covered = std::count(seen.begin() + Vocab::kSpecialCount, seen.end(), 1);
  const int content = vocab.size() - Vocab::kSpecialCount;
  table.coverage = content > 0 ? static_cast<double>(covered) / content : 0.0;
  return table;
}

std::vector<std::string> split_utterances(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    std::string_view piece = line.substr(start, tab == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : tab - start);
    out.emplace_back(piece);
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::vector<std::string>> read_dialogues(
    const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> out;
  for (const auto& line : read_lines(path)) {
    if (tokenize(line).empty()) continue;
    out.push_back(split_utterances(line));
  }
  return out;
}

}  // namespace twr
