#pragma once

#include <algorithm>
#include <cmath>

#include "fairhgr/estimators/types.hpp"

namespace fairhgr::estimators {

/// Sample Pearson correlation, clamped to [-1, 1].
inline double pearson(const SamplePairs& pairs) {
  pairs.validate();
  const std::size_t n = pairs.size();
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += pairs.u[i];
    mv += pairs.v[i];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  double suu = 0.0, svv = 0.0, suv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = pairs.u[i] - mu;
    const double dv = pairs.v[i] - mv;
    suu += du * du;
    svv += dv * dv;
    suv += du * dv;
  }
  if (!(suu > 0.0) || !(svv > 0.0)) throw InvalidArgument("pearson: zero variance");
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

}  // namespace fairhgr::estimators
