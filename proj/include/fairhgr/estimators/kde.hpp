#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fairhgr/estimators/types.hpp"
#include "fairhgr/estimators/witsenhausen.hpp"
#include "fairhgr/stats.hpp"

namespace fairhgr::estimators {

/// Silverman's rule h = (4 / (3n))^(1/5) * sd, sd with divisor n - 1.
inline double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("silverman_bandwidth: need n >= 2");
  const double sd = stats::stddev(samples, 1);
  if (!(sd > 0.0)) throw InvalidArgument("silverman_bandwidth: zero variance");
  const double n = static_cast<double>(samples.size());
  return std::pow(4.0 / (3.0 * n), 0.2) * sd;
}

struct KdeGrid {
  std::vector<double> grid_u;
  std::vector<double> grid_v;
  /// density(i, j) at (grid_u[i], grid_v[j]); integrates to 1 by the trapezoidal rule.
  Eigen::MatrixXd density;
  double bandwidth_u = 0.0;
  double bandwidth_v = 0.0;

  /// Probability mass of each grid node under the trapezoidal rule.
  [[nodiscard]] Eigen::MatrixXd cell_masses() const {
    const Eigen::VectorXd wu = trapezoid_weights(grid_u);
    const Eigen::VectorXd wv = trapezoid_weights(grid_v);
    Eigen::MatrixXd mass = density.array() * (wu * wv.transpose()).array();
    return mass / mass.sum();
  }

  static Eigen::VectorXd trapezoid_weights(const std::vector<double>& grid) {
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      const double h = grid[static_cast<std::size_t>(i + 1)] - grid[static_cast<std::size_t>(i)];
      w(i) += 0.5 * h;
      w(i + 1) += 0.5 * h;
    }
    return w;
  }
};

namespace detail {

inline std::vector<double> axis_grid(std::span<const double> x, double h, double padding,
                                     std::size_t size) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double a = *lo - padding * h;
  const double b = *hi + padding * h;
  std::vector<double> g(size);
  for (std::size_t i = 0; i < size; ++i) {
    g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(size - 1);
  }
  return g;
}

/// kernel(i, k) = phi((grid[i] - x[k]) / h) / h
inline Eigen::MatrixXd kernel_matrix(const std::vector<double>& grid,
                                     std::span<const double> x, double h) {
  Eigen::MatrixXd k(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(x.size()));
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double z = (grid[i] - x[j]) / h;
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = norm * std::exp(-0.5 * z * z);
    }
  }
  return k;
}

/// Silverman or fixed bandwidth, floored at half the grid spacing it induces:
/// h >= (range + 2 padding h) / (2 (size - 1)). A narrower kernel can fall
/// between nodes and leave whole rows of the grid without mass.
inline double bandwidth(std::span<const double> x, const KdeConfig& cfg) {
  const double h = cfg.bandwidth_rule == BandwidthRule::fixed ? cfg.fixed_bandwidth
                                                              : silverman_bandwidth(x);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double denom = 2.0 * static_cast<double>(cfg.grid_size - 1) - 2.0 * cfg.grid_padding;
  const double floor = denom > 0.0 ? (*hi - *lo) / denom : 0.0;
  return std::max(h, floor);
}

}  // namespace detail

/// Product-Gaussian KDE of (u, v) on a regular grid spanning the data range
/// plus grid_padding bandwidths on each side.
inline KdeGrid kde_joint_density(const SamplePairs& pairs, const KdeConfig& cfg = {}) {
  pairs.validate();
  cfg.validate();
  KdeGrid out;
  out.bandwidth_u = detail::bandwidth(pairs.u, cfg);
  out.bandwidth_v = detail::bandwidth(pairs.v, cfg);
  out.grid_u = detail::axis_grid(pairs.u, out.bandwidth_u, cfg.grid_padding, cfg.grid_size);
  out.grid_v = detail::axis_grid(pairs.v, out.bandwidth_v, cfg.grid_padding, cfg.grid_size);
  const Eigen::MatrixXd ku = detail::kernel_matrix(out.grid_u, pairs.u, out.bandwidth_u);
  const Eigen::MatrixXd kv = detail::kernel_matrix(out.grid_v, pairs.v, out.bandwidth_v);
  out.density = ku * kv.transpose() / static_cast<double>(pairs.size());
  const Eigen::VectorXd wu = KdeGrid::trapezoid_weights(out.grid_u);
  const Eigen::VectorXd wv = KdeGrid::trapezoid_weights(out.grid_v);
  const double integral = wu.dot(out.density * wv);
  if (!(integral > 0.0) || !std::isfinite(integral)) {
    throw NumericError("kde_joint_density: degenerate density");
  }
  out.density /= integral;
  return out;
}

/// HGR from the KDE-discretized joint distribution.
inline Estimate hgr_kde(const SamplePairs& pairs, const KdeConfig& cfg = {}) {
  const KdeGrid grid = kde_joint_density(pairs, cfg);
  Estimate e = witsenhausen_discrete(grid.cell_masses());
  e.diagnostics["bandwidth_u"] = grid.bandwidth_u;
  e.diagnostics["bandwidth_v"] = grid.bandwidth_v;
  return e;
}

/// chi^2(P_UV, P_U x P_V) = sum Q^2 - 1 over the KDE grid masses.
inline Estimate chi2_kde(const SamplePairs& pairs, const KdeConfig& cfg = {}) {
  const KdeGrid grid = kde_joint_density(pairs, cfg);
  const WitsenhausenMatrix w = witsenhausen_matrix(grid.cell_masses());
  Estimate e;
  e.value = w.q.squaredNorm() - 1.0;
  e.diagnostics["bandwidth_u"] = grid.bandwidth_u;
  e.diagnostics["bandwidth_v"] = grid.bandwidth_v;
  return e;
}

}  // namespace fairhgr::estimators
