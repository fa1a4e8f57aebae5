#pragma once

#include "pmm/types.hpp"

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pmm {

/// Deterministic random stream: mt19937_64 with explicit uniform/normal transforms so
/// draws do not depend on the standard library's distribution implementations.
///
/// Named substreams derive independent generators from one run seed
/// (e.g. Rng(seed).substream("init")).
class Rng {
 public:
  /// Bumped whenever the derivation or transforms change.
  static constexpr int kVersion = 1;

  explicit Rng(std::uint64_t seed);

  Rng substream(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box–Muller, one draw per call).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }

  template <typename T>
  void shuffle(std::vector<T>& items)
  {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// First `count` elements of a seeded permutation of 0..n-1.
std::vector<Index> sample_without_replacement(Index n, Index count, Rng& rng);

}  // namespace pmm
