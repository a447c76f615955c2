#pragma once

#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairhgr/metrics/metrics.hpp"

namespace fairhgr::metrics {

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"mse", r.mse},
          {"hgr_nn", r.hgr_nn},
          {"hgr_kde", r.hgr_kde},
          {"rdc", r.rdc},
          {"chi2_kde", r.chi2_kde},
          {"chi2_nn", r.chi2_nn},
          {"fairquant", r.fairquant},
          {"mode", fairtrain::to_string(r.mode)},
          {"penalty", r.penalty},
          {"lambda", r.lambda},
          {"train_seed", r.train_seed},
          {"estimator_seed", r.estimator_seed}};
}

inline nlohmann::json to_json(const DominanceRow& r) {
  return {{"rho", r.rho},
          {"hgr_sq_est", r.hgr_sq_est},
          {"chi2_est", r.chi2_est},
          {"mi_bits_est", r.mi_bits_est},
          {"mi_bound_est", r.mi_bound_est},
          {"hgr_sq_true", r.hgr_sq_true},
          {"chi2_true", r.chi2_true},
          {"mi_bound_true", r.mi_bound_true}};
}

inline nlohmann::json to_json(const DominanceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back(to_json(row));
  return {{"t", r.t}, {"rows", rows}};
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace detail

inline std::string eval_csv_header() {
  return "mode,penalty,lambda,train_seed,estimator_seed,mse,hgr_nn,hgr_kde,rdc,chi2_kde,chi2_nn,"
         "fairquant";
}

inline std::string to_csv_row(const EvalReport& r) {
  using detail::fmt;
  std::ostringstream os;
  os << fairtrain::to_string(r.mode) << ',' << r.penalty << ',' << fmt(r.lambda) << ','
     << r.train_seed << ',' << r.estimator_seed << ',' << fmt(r.mse) << ',' << fmt(r.hgr_nn)
     << ',' << fmt(r.hgr_kde) << ',' << fmt(r.rdc) << ',' << fmt(r.chi2_kde) << ','
     << fmt(r.chi2_nn) << ',' << fmt(r.fairquant);
  return os.str();
}

inline std::string to_csv(const DominanceReport& r) {
  using detail::fmt;
  std::ostringstream os;
  os << "rho,hgr_sq_est,chi2_est,mi_bits_est,mi_bound_est,hgr_sq_true,chi2_true,mi_bound_true,t\n";
  for (const auto& row : r.rows) {
    os << fmt(row.rho) << ',' << fmt(row.hgr_sq_est) << ',' << fmt(row.chi2_est) << ','
       << fmt(row.mi_bits_est) << ',' << fmt(row.mi_bound_est) << ',' << fmt(row.hgr_sq_true)
       << ',' << fmt(row.chi2_true) << ',' << fmt(row.mi_bound_true) << ',' << fmt(r.t) << '\n';
  }
  return os.str();
}

}  // namespace fairhgr::metrics
