#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "fairhgr/estimators/types.hpp"
#include "fairhgr/rng.hpp"

namespace fairhgr::estimators {

struct NullSummary {
  std::vector<double> values;  // sorted ascending
  double mean = 0.0;
  double stddev = 0.0;

  /// Empirical quantile with linear interpolation.
  [[nodiscard]] double quantile(double q) const {
    if (values.empty()) throw InvalidArgument("NullSummary: no values");
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  }
};

using ScalarEstimator = std::function<double(const SamplePairs&)>;

/// Distribution of an estimator under the independence null, by permuting v.
inline NullSummary null_calibration(const ScalarEstimator& estimator, const SamplePairs& pairs,
                                    std::size_t permutations, std::uint64_t seed) {
  pairs.validate();
  if (permutations == 0) throw InvalidArgument("null_calibration: permutations must be >= 1");
  Rng rng(seed, 0x9E7);
  NullSummary s;
  for (std::size_t p = 0; p < permutations; ++p) {
    SamplePairs shuffled = pairs;
    rng.shuffle(std::span<double>(shuffled.v));
    s.values.push_back(estimator(shuffled));
  }
  std::sort(s.values.begin(), s.values.end());
  double sum = 0.0;
  for (double v : s.values) sum += v;
  s.mean = sum / static_cast<double>(s.values.size());
  double ss = 0.0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = s.values.size() > 1 ? std::sqrt(ss / static_cast<double>(s.values.size() - 1)) : 0.0;
  return s;
}

}  // namespace fairhgr::estimators
