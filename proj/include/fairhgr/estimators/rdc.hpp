#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "fairhgr/estimators/types.hpp"
#include "fairhgr/rng.hpp"
#include "fairhgr/stats.hpp"

namespace fairhgr::estimators {

namespace detail {

/// sin((s / 2) * [F(x), 1] * W) with W standard normal (2 x k) and F the
/// empirical copula transform.
inline Eigen::MatrixXd random_sine_features(std::span<const double> x, std::size_t k,
                                            double scale, Rng& rng) {
  const std::vector<double> ranks = stats::average_ranks(x);
  const double n = static_cast<double>(x.size());
  Eigen::MatrixXd w(2, static_cast<Eigen::Index>(k));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    w(0, j) = rng.normal();
    w(1, j) = rng.normal();
  }
  Eigen::MatrixXd feats(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(k));
  const double s = scale / 2.0;
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    const double c = ranks[static_cast<std::size_t>(i)] / n;
    for (Eigen::Index j = 0; j < feats.cols(); ++j) {
      feats(i, j) = std::sin(s * (c * w(0, j) + w(1, j)));
    }
  }
  return feats;
}

/// Orthonormal basis of the centered column space.
inline Eigen::MatrixXd centered_basis(Eigen::MatrixXd a) {
  a.rowwise() -= a.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? sv(0) * 1e-10 : 0.0;
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace detail

/// Largest canonical correlation between two feature blocks.
inline double largest_canonical_correlation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::MatrixXd qx = detail::centered_basis(x);
  const Eigen::MatrixXd qy = detail::centered_basis(y);
  if (qx.cols() == 0 || qy.cols() == 0) return 0.0;
  const Eigen::MatrixXd m = qx.transpose() * qy;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

/// Randomized dependence coefficient.
inline Estimate rdc(const SamplePairs& pairs, const RdcConfig& cfg = {}) {
  pairs.validate();
  if (pairs.size() <= cfg.k) {
    throw InvalidArgument("rdc: need more samples than random features (n > k)");
  }
  if (cfg.k < 1) throw InvalidArgument("rdc: k must be >= 1");
  if (!(cfg.scale > 0.0)) throw InvalidArgument("rdc: scale must be positive");
  Rng rng(cfg.seed, 0x4DC);
  const Eigen::MatrixXd fu = detail::random_sine_features(pairs.u, cfg.k, cfg.scale, rng);
  const Eigen::MatrixXd fv = detail::random_sine_features(pairs.v, cfg.k, cfg.scale, rng);
  Estimate e;
  e.value = largest_canonical_correlation(fu, fv);
  e.diagnostics["k"] = static_cast<double>(cfg.k);
  e.diagnostics["scale"] = cfg.scale;
  return e;
}

}  // namespace fairhgr::estimators
