#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mosaic {

// Deterministic RNG with a fixed algorithm so that seeded runs produce
// identical output on every platform (std::uniform_int_distribution is
// implementation-defined and therefore unsuitable for reproducible datasets).
//
// Core generator is splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  // Derive a child generator; stable function of (seed, label).
  Rng fork(std::string_view label) const;

 private:
  std::uint64_t state_;
};

// FNV-1a 64-bit hash, used for stable content ids.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xCBF29CE484222325ULL);

// Lowercase hex rendering of a 64-bit hash (16 chars).
std::string hash_hex(std::uint64_t value);

}  // namespace mosaic
