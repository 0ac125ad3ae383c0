#pragma once

// Text ingestion: vocabulary, sentence encoding, padded batches, and
// pre-trained embedding files.
//
// Corpus files are UTF-8, one sentence per line, whitespace-tokenised; blank
// lines are skipped. Dialogue files hold one conversation per line with
// utterances separated by a tab. No other normalisation (case, digits) is
// applied.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "twr/autodiff.hpp"
#include "twr/rng.hpp"

namespace twr {

using Sentence = std::vector<int>;

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSpecialCount = 4;

  /// Specials only.
  Vocab();
  /// Specials followed by `tokens` in the given order. Duplicates and
  /// special spellings among `tokens` are rejected.
  explicit Vocab(std::span<const std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // unk when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::span<const std::string> tokens() const { return tokens_; }

  /// FNV-1a over the id-ordered token list.
  std::uint64_t hash() const;

  static bool is_special(int id) { return id >= 0 && id < kSpecialCount; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<std::string> tokenize(std::string_view text);
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Frequency-ranked vocabulary (ties broken lexicographically), truncated to
/// max_size entries including the four specials.
Vocab build_vocab(std::span<const std::string> lines, int max_size,
                  int min_count = 1);
Vocab build_vocab(const std::filesystem::path& corpus, int max_size,
                  int min_count = 1);

void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab load_vocab(const std::filesystem::path& path);

/// Content ids without bos/eos.
Sentence encode_tokens(const Vocab& vocab, std::string_view text);
/// [bos, content..., eos].
Sentence encode_sentence(const Vocab& vocab, std::string_view text);
/// Drops pad and bos, stops at eos; unk prints as its spelling.
std::string decode_ids(const Vocab& vocab, std::span<const int> ids);
std::vector<std::string> decode_tokens(const Vocab& vocab,
                                       std::span<const int> ids);

/// Encodes every non-blank line (content ids only).
std::vector<Sentence> encode_corpus(const Vocab& vocab,
                                    std::span<const std::string> lines);

struct Batch {
  Eigen::MatrixXi ids;      // batch x max_length, content ids, pad beyond length
  std::vector<int> lengths; // content length per row
  std::vector<std::size_t> source;  // index of each row in the encoded corpus

  Eigen::Index size() const { return ids.rows(); }
  int max_length() const { return static_cast<int>(ids.cols()); }
  bool is_pad(Eigen::Index row, int t) const {
    return t >= lengths[static_cast<std::size_t>(row)];
  }
};

/// Pads the selected sentences to their own maximum length.
Batch make_batch(std::span<const Sentence> corpus,
                 std::span<const std::size_t> rows);
Batch make_batch(std::span<const Sentence> sentences);

/// One epoch: a Fisher-Yates shuffle drawn from rng, then consecutive slices
/// of batch_size (the last may be short).
std::vector<Batch> make_batches(std::span<const Sentence> corpus, int batch_size,
                                Rng& rng);

/// Same partition without shuffling.
std::vector<Batch> make_ordered_batches(std::span<const Sentence> corpus,
                                        int batch_size);

struct EmbeddingTable {
  Matrix values;         // vocab_size x dim
  double coverage = 0.0; // fraction of non-special vocabulary rows read from file
};

/// Reads "token v1 ... v_dim" lines. Rows absent from the file are drawn
/// uniform in [-0.08, 0.08]. A leading "count dim" header line is skipped.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const Vocab& vocab, int dim, Rng& rng);

/// Each line split on tab into utterances. Blank lines are skipped.
std::vector<std::vector<std::string>> read_dialogues(
    const std::filesystem::path& path);
std::vector<std::string> split_utterances(std::string_view line);

}  // namespace twr
