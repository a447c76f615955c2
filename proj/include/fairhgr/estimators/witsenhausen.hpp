#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fairhgr/estimators/types.hpp"

namespace fairhgr::estimators {

/// Singular values (descending) by one-sided Jacobi rotations.
///
/// Columns are orthogonalized pairwise until every pair is orthogonal to
/// machine precision; the column norms are then the singular values.
inline std::vector<double> jacobi_singular_values(const Eigen::MatrixXd& a,
                                                  int max_sweeps = 60) {
  Eigen::MatrixXd w = a.cols() > a.rows() ? Eigen::MatrixXd(a.transpose()) : a;
  const Eigen::Index n = w.cols();
  constexpr double tol = 1e-15;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = w.col(p).squaredNorm();
        const double beta = w.col(q).squaredNorm();
        const double gamma = w.col(p).dot(w.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        Eigen::VectorXd cp = w.col(p);
        w.col(p) = c * cp - s * w.col(q);
        w.col(q) = s * cp + c * w.col(q);
      }
    }
    if (!rotated) break;
  }
  std::vector<double> sv(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) sv[static_cast<std::size_t>(j)] = w.col(j).norm();
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Q(j, j') = P(j, j') / sqrt(P_U(j) P_V(j')) over the rows and columns with
/// positive marginal mass.
struct WitsenhausenMatrix {
  Eigen::MatrixXd q;
  std::vector<double> p_u;
  std::vector<double> p_v;
};

inline WitsenhausenMatrix witsenhausen_matrix(const Eigen::MatrixXd& joint) {
  if (joint.size() == 0) throw InvalidArgument("witsenhausen: empty probability matrix");
  if (!joint.allFinite()) throw InvalidArgument("witsenhausen: non-finite entry");
  if ((joint.array() < 0.0).any()) throw InvalidArgument("witsenhausen: negative probability");
  const double total = joint.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("witsenhausen: probabilities sum to " + std::to_string(total));
  }
  const Eigen::VectorXd row = joint.rowwise().sum();
  const Eigen::RowVectorXd col = joint.colwise().sum();
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (row(i) >= std::numeric_limits<double>::min()) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < col.size(); ++j) {
    if (col(j) >= std::numeric_limits<double>::min()) cols.push_back(j);
  }
  WitsenhausenMatrix w;
  w.q.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) w.p_u.push_back(row(rows[i]));
  for (std::size_t j = 0; j < cols.size(); ++j) w.p_v.push_back(col(cols[j]));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      w.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          joint(rows[i], cols[j]) / std::sqrt(w.p_u[i] * w.p_v[j]);
    }
  }
  return w;
}

/// HGR of a discrete joint distribution: the second largest singular value of Q.
inline Estimate witsenhausen_discrete(const Eigen::MatrixXd& joint) {
  const WitsenhausenMatrix w = witsenhausen_matrix(joint);
  Estimate e;
  e.singular_values = jacobi_singular_values(w.q);
  e.value = e.singular_values.size() > 1 ? e.singular_values[1] : 0.0;
  e.diagnostics["largest_singular_value"] = e.singular_values.front();
  e.diagnostics["rows"] = static_cast<double>(w.q.rows());
  e.diagnostics["cols"] = static_cast<double>(w.q.cols());
  return e;
}

}  // namespace fairhgr::estimators
