#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace fairhgr {

/// Mixes a 64-bit state with the SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Portable random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than taken from
/// <random>, since the standard leaves their algorithms unspecified. Normal
/// draws use the inverse CDF, so every draw consumes exactly one engine word.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : engine_(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL))) {}

  /// Child generator for an independent named substream.
  [[nodiscard]] Rng split(std::uint64_t stream) {
    return Rng(engine_(), stream);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform() {
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    return (static_cast<double>(engine_() >> 11) + 0.5) * scale;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * uniform());
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform index in [0, n) by rejection on the top bits.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
  }

  /// Fisher-Yates shuffle (std::shuffle's algorithm is unspecified).
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    shuffle(std::span<std::size_t>(idx));
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fairhgr
