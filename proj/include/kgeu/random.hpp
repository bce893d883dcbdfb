#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace kgeu {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream for (seed, index); distinct indices give decorrelated generators.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix_seed(mix_seed(seed) ^ mix_seed(index + 0x51ed27f1ULL)));
}

/// Uniform integer in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline bool fair_coin(Rng& rng) { return (rng() >> 63) != 0; }

/// Draws k distinct positions of `items` uniformly without replacement
/// (partial Fisher-Yates). The returned elements keep draw order.
template <typename T>
std::vector<T> sample_without_replacement(std::span<const T> items, std::size_t k, Rng& rng) {
  std::vector<T> pool(items.begin(), items.end());
  if (k > pool.size()) k = pool.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::swap(items[i], items[uniform_index(rng, i + 1)]);
  }
}

}  // namespace kgeu
