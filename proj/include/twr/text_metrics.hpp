#pragma once

// Overlap and diversity metrics over token sequences. The n-gram metrics are
// templates over the token type so they work on strings or vocabulary ids and
// depend only on token equality.
//
// BLEU (per response, against a reference set):
//   p_n  = clipped n-gram matches / response n-grams, n = 1..max_n
//          clipping uses the largest count of the n-gram in any one reference
//   zero matches for n >= 2: p_n = 1 / (response n-grams + 1)
//   zero unigram matches:    BLEU = 0
//   BP   = 1 if c > r else exp(1 - r / c), r = closest reference length
//          (ties toward the shorter one), c = response length
//   BLEU = BP * exp(mean_n log p_n)

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twr/autodiff.hpp"

namespace twr {

enum class RougeKind { One, Two, L };

namespace detail {

template <class T>
std::map<std::vector<T>, long> ngram_counts(std::span<const T> tokens, std::size_t n) {
  std::map<std::vector<T>, long> out;
  if (n == 0 || tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<T>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                         tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

template <class T>
long clipped_matches(const std::map<std::vector<T>, long>& hyp,
                     const std::map<std::vector<T>, long>& ref) {
  long m = 0;
  for (const auto& [g, c] : hyp) {
    const auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

template <class T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

/// ROUGE-1, ROUGE-2 or ROUGE-L F1 of a hypothesis against one reference.
template <class T>
double rouge_f1(std::span<const T> hypothesis, std::span<const T> reference, RougeKind kind) {
  double matches = 0.0;
  double hyp_total = 0.0;
  double ref_total = 0.0;
  if (kind == RougeKind::L) {
    matches = static_cast<double>(detail::lcs_length(hypothesis, reference));
    hyp_total = static_cast<double>(hypothesis.size());
    ref_total = static_cast<double>(reference.size());
  } else {
    const std::size_t n = kind == RougeKind::One ? 1 : 2;
    const auto h = detail::ngram_counts(hypothesis, n);
    const auto r = detail::ngram_counts(reference, n);
    matches = static_cast<double>(detail::clipped_matches(h, r));
    hyp_total = hypothesis.size() >= n ? static_cast<double>(hypothesis.size() - n + 1) : 0.0;
    ref_total = reference.size() >= n ? static_cast<double>(reference.size() - n + 1) : 0.0;
  }
  if (hyp_total == 0.0 || ref_total == 0.0) return 0.0;
  return detail::f1(matches / hyp_total, matches / ref_total);
}

template <class T>
double rouge_f1(const std::vector<T>& hypothesis, const std::vector<T>& reference,
                RougeKind kind) {
  return rouge_f1(std::span<const T>(hypothesis), std::span<const T>(reference), kind);
}

/// Smoothed sentence BLEU of one response against a reference set.
template <class T>
double sentence_bleu(const std::vector<T>& response, const std::vector<std::vector<T>>& references,
                     int max_n = 3) {
  if (response.empty() || references.empty()) return 0.0;
  const std::span<const T> hyp(response);
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto h = detail::ngram_counts(hyp, static_cast<std::size_t>(n));
    std::map<std::vector<T>, long> best;
    for (const auto& ref : references) {
      for (const auto& [g, c] : detail::ngram_counts(std::span<const T>(ref),
                                                     static_cast<std::size_t>(n))) {
        long& slot = best[g];
        slot = std::max(slot, c);
      }
    }
    long total = 0;
    for (const auto& [g, c] : h) total += c;
    const long m = detail::clipped_matches(h, best);
    double p = 0.0;
    if (m > 0) {
      p = static_cast<double>(m) / static_cast<double>(total);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(response.size());
  double r = static_cast<double>(references.front().size());
  for (const auto& ref : references) {
    const double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) {
      r = len;
    }
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / max_n);
}

struct BleuScores {
  double precision = 0.0;  // mean over responses
  double recall = 0.0;     // max over responses
  double f1 = 0.0;
};

template <class T>
BleuScores bleu_prf(const std::vector<std::vector<T>>& responses,
                    const std::vector<std::vector<T>>& references, int max_n = 3) {
  BleuScores s;
  if (responses.empty()) return s;
  for (const auto& r : responses) {
    const double b = sentence_bleu(r, references, max_n);
    s.precision += b;
    s.recall = std::max(s.recall, b);
  }
  s.precision /= static_cast<double>(responses.size());
  s.f1 = detail::f1(s.precision, s.recall);
  return s;
}

struct DistScores {
  double intra_dist1 = 0.0;
  double intra_dist2 = 0.0;
  double inter_dist1 = 0.0;
  double inter_dist2 = 0.0;
};

namespace detail {

/// unique / total n-grams over the pooled sequences; negative if none.
template <class T>
double distinct_ratio(std::span<const std::vector<T>> seqs, std::size_t n) {
  std::set<std::vector<T>> unique;
  long total = 0;
  for (const auto& s : seqs) {
    for (const auto& [g, c] : ngram_counts(std::span<const T>(s), n)) {
      unique.insert(g);
      total += c;
    }
  }
  return total == 0 ? -1.0 : static_cast<double>(unique.size()) / static_cast<double>(total);
}

}  // namespace detail

/// Distinct-n ratios over a set of contexts, each holding its sampled
/// responses. A response (or context) with no n-grams of order n is left out
/// of that order's average.
template <class T>
DistScores dist_scores(const std::vector<std::vector<std::vector<T>>>& contexts) {
  DistScores out;
  double* intra[2] = {&out.intra_dist1, &out.intra_dist2};
  double* inter[2] = {&out.inter_dist1, &out.inter_dist2};
  for (std::size_t n = 1; n <= 2; ++n) {
    double intra_sum = 0.0;
    long intra_count = 0;
    double inter_sum = 0.0;
    long inter_count = 0;
    for (const auto& responses : contexts) {
      double ctx_sum = 0.0;
      long ctx_count = 0;
      for (const auto& r : responses) {
        const double v = detail::distinct_ratio(std::span<const std::vector<T>>(&r, 1), n);
        if (v >= 0.0) {
          ctx_sum += v;
          ++ctx_count;
        }
      }
      if (ctx_count > 0) {
        intra_sum += ctx_sum / static_cast<double>(ctx_count);
        ++intra_count;
      }
      const double pooled = detail::distinct_ratio(std::span<const std::vector<T>>(responses), n);
      if (pooled >= 0.0) {
        inter_sum += pooled;
        ++inter_count;
      }
    }
    *intra[n - 1] = intra_count > 0 ? intra_sum / static_cast<double>(intra_count) : 0.0;
    *inter[n - 1] = inter_count > 0 ? inter_sum / static_cast<double>(inter_count) : 0.0;
  }
  return out;
}

template <class T>
DistScores dist_scores(const std::vector<std::vector<T>>& responses) {
  return dist_scores(std::vector<std::vector<std::vector<T>>>{responses});
}

struct BowScores {
  double average = 0.0;
  double extreme = 0.0;
  double greedy = 0.0;
};

/// Cosine of two vectors; 0 when either is zero.
double cosine(const RowVector& a, const RowVector& b);

/// Bag-of-words embedding similarity of a response to a reference, both given
/// as rows of `embeddings`.
///   average  cosine of the mean embeddings
///   extreme  cosine of the per-dimension largest-magnitude values (sign kept)
///   greedy   mean over response tokens of the best cosine to any reference token
BowScores bow_embedding_scores(std::span<const int> response, std::span<const int> reference,
                               const Matrix& embeddings);

}  // namespace twr
