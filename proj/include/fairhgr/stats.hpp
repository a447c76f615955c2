#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "fairhgr/error.hpp"

namespace fairhgr::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("mean: empty input");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Variance with divisor n - ddof.
inline double variance(std::span<const double> x, int ddof = 1) {
  if (x.size() <= static_cast<std::size_t>(ddof)) {
    throw InvalidArgument("variance: not enough samples");
  }
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - static_cast<std::size_t>(ddof));
}

inline double stddev(std::span<const double> x, int ddof = 1) {
  return std::sqrt(variance(x, ddof));
}

/// z-scores with the population standard deviation.
inline std::vector<double> zscore(std::span<const double> x) {
  const double m = mean(x);
  const double sd = stddev(x, 0);
  if (!(sd > 0.0)) throw InvalidArgument("zscore: zero variance");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - m) / sd;
  return out;
}

/// Average ranks (1-based); ties share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

}  // namespace fairhgr::stats
