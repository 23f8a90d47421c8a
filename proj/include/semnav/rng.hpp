#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace semnav {

/// SplitMix64 (Steele, Lea & Flood 2014) with the reference constants.
///
///   state += 0x9E3779B97F4A7C15
///   z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// Derived draws:
///   uniform()        = (next() >> 11) * 2^-53, in [0, 1)
///   uniform_index(n) = next() % n after rejecting draws below (2^64 - n) % n
///   normal()         = Box-Muller on two uniforms, cosine branch only
///
/// Every stochastic step in the library draws from this generator, so a seed
/// reproduces the same stream in any language that follows the recipe above.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next();
  double uniform();
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();

  std::uint64_t state() const { return state_; }

private:
  std::uint64_t state_;
};

/// In-place Fisher-Yates, drawing j = i + uniform_index(n - i) for i = 0..n-2.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  const std::size_t n = items.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    if (j != i) std::swap(items[i], items[j]);
  }
}

/// Derives an independent stream seed; used where one seed feeds several
/// consumers (model init vs. sampling).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace semnav
