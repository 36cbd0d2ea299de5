#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace backstory::util {

// std::uniform_int_distribution and std::shuffle are implementation
// defined; these helpers keep seeded output identical across toolchains.
using Engine = std::mt19937_64;

// Uniform in [0, n) by rejection; n must be > 0.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  // 2^64 mod n; accepting x >= threshold leaves a multiple of n outcomes.
  const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
  std::uint64_t x;
  do {
    x = eng();
  } while (x < threshold);
  return x % n;
}

template <typename T>
void fisher_yates(std::vector<T>& items, Engine& eng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(items[i - 1], items[j]);
  }
}

// Moves a uniformly drawn k-subset (in random order) to the front.
template <typename T>
void partial_fisher_yates(std::vector<T>& items, std::size_t k, Engine& eng) {
  const std::size_t n = items.size();
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(eng, n - i));
    std::swap(items[i], items[j]);
  }
}

}  // namespace backstory::util
