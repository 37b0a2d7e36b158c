#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace eemo {

// std::mt19937_64 output is fully specified by the standard, but the
// distributions are not. These helpers consume raw engine output only, so
// every seeded computation is bit-reproducible across standard libraries.
using Engine = std::mt19937_64;

inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, bound) by rejection.
inline std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = engine();
  while (x >= limit) x = engine();
  return x % bound;
}

template <class T>
void shuffle(std::span<T> items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Engine& engine) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  shuffle(std::span<std::size_t>(idx), engine);
  return idx;
}

}  // namespace eemo
