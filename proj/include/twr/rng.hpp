#pragma once

// Counter-based random source. The n-th 64-bit draw is SplitMix64's output
// function applied to seed + (n + 1) * golden_gamma, so the whole stream is a
// pure function of (seed, counter) and replays identically on any platform.

#include <cstdint>
#include <string_view>
#include <vector>

#include "twr/autodiff.hpp"

namespace twr {

struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_{seed, 0} {}
  explicit Rng(RngState state) : state_(state) {}

  std::uint64_t next_u64();
  /// Uniform on (0, 1]; never returns 0 so log() of a draw is always finite.
  double uniform();
  /// Standard normal by Box-Muller, cosine branch only: two uniforms per draw.
  double normal();
  /// rows x cols standard normals, filled in row-major order.
  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
  /// Uniform on [lo, hi), filled in row-major order.
  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  const RngState& state() const { return state_; }

 private:
  RngState state_;
};

/// Fisher-Yates permutation of 0..n-1 (one below() call per swap).
std::vector<std::size_t> shuffled_order(std::size_t n, Rng& rng);

/// Sub-seed derived from a parent seed, a purpose label, and an index.
/// FNV-1a over the label, folded with the parent and index through SplitMix64.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                          std::uint64_t index = 0);

}  // namespace twr
