#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fairhgr/error.hpp"

namespace fairhgr::nn {

struct Standardized {
  std::vector<double> values;
  double mean = 0.0;
  double variance = 0.0;
};

/// (v - mean) / sqrt(var + epsilon) with the population variance.
inline Standardized standardize_batch(std::span<const double> values, double epsilon) {
  if (values.size() < 2) throw InvalidArgument("standardize_batch: need at least 2 values");
  if (!(epsilon >= 0.0)) throw InvalidArgument("standardize_batch: epsilon must be >= 0");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double denom = std::sqrt(var + epsilon);
  if (!(denom > 0.0)) throw NumericError("standardize_batch: zero variance with epsilon = 0");
  Standardized out{std::vector<double>(values.size()), mean, var};
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = (values[i] - mean) / denom;
  return out;
}

}  // namespace fairhgr::nn
