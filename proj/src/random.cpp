#include "pmm/random.hpp"

#include "pmm/error.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace pmm {

std::uint64_t fnv1a64(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::substream(std::string_view name) const
{
  // splitmix-style finalizer over (seed, name hash)
  std::uint64_t z = seed_ ^ (fnv1a64(name) + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal()
{
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n)
{
  require(n > 0, ErrorCode::InvalidArgument, "Rng::below requires n > 0");
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::vector<Index> sample_without_replacement(Index n, Index count, Rng& rng)
{
  require(count >= 0 && count <= n, ErrorCode::InvalidArgument, "sample size exceeds population");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

}  // namespace pmm
