#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fairhgr/data/dataset.hpp"
#include "fairhgr/error.hpp"
#include "fairhgr/estimators/kde.hpp"
#include "fairhgr/estimators/neural.hpp"
#include "fairhgr/estimators/rdc.hpp"
#include "fairhgr/fairtrain/fairtrain.hpp"

namespace fairhgr::metrics {

inline double mse(std::span<const double> yhat, std::span<const double> y) {
  if (yhat.size() != y.size()) throw InvalidArgument("mse: length mismatch");
  if (y.empty()) throw InvalidArgument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (yhat[i] - y[i]) * (yhat[i] - y[i]);
  return s / static_cast<double>(y.size());
}

/// Mean absolute deviation of per-quantile group means from the global mean.
///
/// Rows are ordered by s (ties by row index) and cut into q groups whose
/// sizes differ by at most one; the first n mod q groups take the extra row.
inline double fair_quant(std::span<const double> values, std::span<const double> s,
                         std::size_t q = 50) {
  if (values.size() != s.size()) throw InvalidArgument("fair_quant: length mismatch");
  if (q == 0) throw InvalidArgument("fair_quant: q must be >= 1");
  const std::size_t n = values.size();
  if (n < q) throw InvalidArgument("fair_quant: fewer samples than quantiles");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });
  // Offsets from values[0] make a shift of the inputs an exact no-op whenever
  // the shifted values themselves are exact.
  const double ref = values[0];
  double global = 0.0;
  for (double v : values) global += v - ref;
  global /= static_cast<double>(n);

  const std::size_t base = n / q;
  const std::size_t extra = n % q;
  double total = 0.0;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < q; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    double m = 0.0;
    for (std::size_t k = 0; k < size; ++k) m += values[order[pos + k]] - ref;
    m /= static_cast<double>(size);
    total += std::abs(m - global);
    pos += size;
  }
  return total / static_cast<double>(q);
}

struct EvalSettings {
  estimators::NeuralEstimatorConfig hgr = estimators::hgr_nn_defaults();
  estimators::NeuralEstimatorConfig chi2 = estimators::chi2_nn_defaults();
  estimators::KdeConfig kde;
  estimators::RdcConfig rdc;
  std::size_t quantiles = 50;
};

struct EvalReport {
  double mse = 0.0;
  double hgr_nn = 0.0;
  double hgr_kde = 0.0;
  double rdc = 0.0;
  double chi2_kde = 0.0;
  double chi2_nn = 0.0;
  double fairquant = 0.0;
  fairtrain::FairnessMode mode = fairtrain::FairnessMode::demographic_parity;
  std::string penalty = "none";
  double lambda = 0.0;
  std::uint64_t train_seed = 0;
  std::uint64_t estimator_seed = 0;
};

namespace detail {

inline bool constant(const std::vector<double>& x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

}  // namespace detail

/// All metric columns on a held-out split. MSE is in standardized target
/// units. A constant U is independent of S, so its dependence metrics are 0.
inline EvalReport evaluate(const fairtrain::TrainedModel& model, const data::Dataset& test,
                           fairtrain::FairnessMode mode, const EvalSettings& settings = {}) {
  test.validate();
  if (test.rows() == 0) throw InvalidArgument("evaluate: empty test set");
  const std::vector<double> yhat = fairtrain::predict(model, test.x);
  const std::vector<double> y = model.normalization.target(test.y);
  EvalReport r;
  r.mode = mode;
  r.penalty = fairtrain::to_string(model.config.penalty);
  r.lambda = model.config.lambda;
  r.train_seed = model.config.seed;
  r.estimator_seed = settings.hgr.seed;
  r.mse = mse(yhat, y);
  const estimators::SamplePairs uv = fairtrain::select_uv(mode, yhat, y, test.s);
  r.fairquant = fair_quant(uv.u, uv.v, settings.quantiles);
  if (detail::constant(uv.u) || detail::constant(uv.v)) return r;

  estimators::NeuralEstimatorConfig hgr_cfg = settings.hgr;
  estimators::NeuralEstimatorConfig chi2_cfg = settings.chi2;
  hgr_cfg.batch_size = std::min(hgr_cfg.batch_size, uv.size());
  chi2_cfg.batch_size = std::min(chi2_cfg.batch_size, uv.size());
  r.hgr_nn = estimators::hgr_nn(uv, hgr_cfg).value;
  r.chi2_nn = estimators::chi2_nn(uv, chi2_cfg).value;
  r.hgr_kde = estimators::hgr_kde(uv, settings.kde).value;
  r.chi2_kde = estimators::chi2_kde(uv, settings.kde).value;
  estimators::RdcConfig rdc_cfg = settings.rdc;
  if (uv.size() > rdc_cfg.k) r.rdc = estimators::rdc(uv, rdc_cfg).value;
  return r;
}

/// |e^{-1/(2 ln 2)} - 1| / (1 + e^{-1/(2 ln 2)}) ~= 0.3458. The signed form
/// of this expression is negative, which would make "chi^2 >= t" vacuous, so
/// the magnitude is emitted.
inline double dominance_threshold() {
  const double e = std::exp(-1.0 / (2.0 * std::log(2.0)));
  return (1.0 - e) / (1.0 + e);
}

struct DominanceRow {
  double rho = 0.0;
  double hgr_sq_est = 0.0;
  double chi2_est = 0.0;
  double mi_bits_est = 0.0;
  double mi_bound_est = 0.0;
  double hgr_sq_true = 0.0;
  double chi2_true = 0.0;
  double mi_bound_true = 0.0;
};

struct DominanceReport {
  std::vector<DominanceRow> rows;
  double t = dominance_threshold();
};

/// Larger batches and a shorter run than the estimator defaults: at n = 5000
/// this keeps the positive bias of hgr_nn under independence near 0.05.
inline estimators::NeuralEstimatorConfig gaussian_sweep_hgr_defaults(std::uint64_t seed = 0) {
  estimators::NeuralEstimatorConfig c = estimators::hgr_nn_defaults(seed);
  c.batch_size = 512;
  c.iterations = 1000;
  c.f_optimizer.learning_rate = 2e-3;
  c.g_optimizer.learning_rate = 2e-3;
  return c;
}

struct DominanceSettings {
  estimators::NeuralEstimatorConfig hgr = gaussian_sweep_hgr_defaults();
  estimators::NeuralEstimatorConfig chi2 = estimators::chi2_nn_defaults();
  estimators::NeuralEstimatorConfig mine = estimators::mine_defaults();
};

/// Per-rho neural estimates of HGR^2, chi^2 and 1 - 2^{-2 I} on bivariate
/// Gaussian samples, with the closed-form values alongside.
inline DominanceReport gaussian_dominance_check(std::vector<double> rho_grid, std::size_t n,
                                                const DominanceSettings& settings,
                                                std::uint64_t seed) {
  for (double rho : rho_grid) {
    if (!(std::abs(rho) < 1.0)) throw InvalidArgument("gaussian_dominance_check: |rho| must be < 1");
  }
  std::sort(rho_grid.begin(), rho_grid.end());
  DominanceReport report;
  Rng seeds(seed, 0xD0D);
  for (double rho : rho_grid) {
    const std::uint64_t data_seed = seeds.next_u64();
    const std::uint64_t est_seed = seeds.next_u64();
    const estimators::SamplePairs pairs = data::gen_bivariate_gaussian(n, rho, data_seed);
    estimators::NeuralEstimatorConfig hgr = settings.hgr, chi2 = settings.chi2,
                                      mi = settings.mine;
    hgr.seed = est_seed;
    chi2.seed = est_seed + 1;
    mi.seed = est_seed + 2;
    DominanceRow row;
    row.rho = rho;
    const double h = estimators::hgr_nn(pairs, hgr).value;
    row.hgr_sq_est = h * h;
    row.chi2_est = estimators::chi2_nn(pairs, chi2).value;
    row.mi_bits_est = estimators::mine(pairs, mi).value / std::log(2.0);
    row.mi_bound_est = 1.0 - std::pow(2.0, -2.0 * row.mi_bits_est);
    row.hgr_sq_true = rho * rho;
    row.chi2_true = rho * rho / (1.0 - rho * rho);
    row.mi_bound_true = rho * rho;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace fairhgr::metrics
