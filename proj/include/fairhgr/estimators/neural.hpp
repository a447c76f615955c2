#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairhgr/estimators/types.hpp"
#include "fairhgr/nn/mlp.hpp"
#include "fairhgr/nn/optimizer.hpp"
#include "fairhgr/rng.hpp"
#include "fairhgr/stats.hpp"

namespace fairhgr::estimators {

enum class NeuralKind { hgr, chi2, mine };

inline const char* to_string(NeuralKind k) {
  switch (k) {
    case NeuralKind::hgr: return "hgr_nn";
    case NeuralKind::chi2: return "chi2_nn";
    case NeuralKind::mine: return "mine";
  }
  return "?";
}

/// Network outputs are clipped to this magnitude before exponentiation.
inline constexpr double kMineClip = 50.0;

/// The networks that maximize a dependence objective, with their optimizers.
///
/// hgr:  J = mean(std(f(u)) * std(g(v))), batch-standardized.
/// chi2: J = mean f(u, v) - mean(f(u, v') + f(u, v')^2 / 4), v' from the V marginal.
/// mine: J = mean T(u, v) - log mean exp T(u, v'), T = clip(f).
class Adversary {
 public:
  struct Bound {
    nn::MlpBinding f;
    nn::MlpBinding g;
  };

  Adversary(NeuralKind kind, const NeuralEstimatorConfig& cfg)
      : kind_(kind), epsilon_(cfg.epsilon) {
    cfg.validate(kind == NeuralKind::hgr ? 1 : 2);
    if (cfg.f_layers.back().output_width != 1) {
      throw InvalidArgument("adversary: f must have a scalar output");
    }
    Rng seeds(cfg.seed, 0xADF);
    f_ = nn::Mlp(cfg.f_layers, seeds.next_u64());
    const std::uint64_t g_seed = seeds.next_u64();
    opt_f_ = nn::Optimizer(cfg.f_optimizer, f_);
    if (kind_ == NeuralKind::hgr) {
      if (cfg.g_layers.empty() || cfg.g_layers.front().input_width != 1 ||
          cfg.g_layers.back().output_width != 1) {
        throw InvalidArgument("adversary: g must map scalars to scalars");
      }
      g_ = nn::Mlp(cfg.g_layers, g_seed);
      opt_g_ = nn::Optimizer(cfg.g_optimizer, g_);
    }
  }

  [[nodiscard]] NeuralKind kind() const { return kind_; }
  [[nodiscard]] bool needs_marginal() const { return kind_ != NeuralKind::hgr; }
  [[nodiscard]] const nn::Mlp& f() const { return f_; }
  [[nodiscard]] const nn::Mlp& g() const { return g_; }

  [[nodiscard]] Bound bind(nn::Tape& tape) const {
    Bound b;
    b.f = f_.bind(tape);
    if (kind_ == NeuralKind::hgr) b.g = g_.bind(tape);
    return b;
  }

  /// Records J on the tape; u, v and v_marginal are (b x 1).
  nn::Var objective(nn::Tape& t, const Bound& b, nn::Var u, nn::Var v,
                    std::optional<nn::Var> v_marginal = std::nullopt) const {
    switch (kind_) {
      case NeuralKind::hgr: {
        const nn::Var fu = t.standardize(f_.apply(t, b.f, u, false), epsilon_);
        const nn::Var gv = t.standardize(g_.apply(t, b.g, v, false), epsilon_);
        return t.mean(t.mul(fu, gv));
      }
      case NeuralKind::chi2: {
        const nn::Var joint = f_.apply(t, b.f, t.concat_cols(u, v), false);
        const nn::Var marg = f_.apply(t, b.f, t.concat_cols(u, require(v_marginal)), false);
        const nn::Var penalty = t.add(marg, t.scale(t.square(marg), 0.25));
        return t.sub(t.mean(joint), t.mean(penalty));
      }
      case NeuralKind::mine: {
        const nn::Var joint = t.clamp(f_.apply(t, b.f, t.concat_cols(u, v), false),
                                      -kMineClip, kMineClip);
        const nn::Var marg = t.clamp(
            f_.apply(t, b.f, t.concat_cols(u, require(v_marginal)), false),
            -kMineClip, kMineClip);
        return t.sub(t.mean(joint), t.log(t.mean(t.exp(marg))));
      }
    }
    throw InvalidArgument("adversary: unknown kind");
  }

  /// One gradient-ascent step from a tape whose backward() ran from J.
  void ascend(const nn::Tape& tape, const Bound& b) {
    const nn::MlpGradients gf = f_.gradients(tape, b.f);
    if (!gf.all_finite()) throw NumericError("adversary: non-finite gradient");
    opt_f_.step(f_, gf, nn::Direction::ascend);
    if (kind_ == NeuralKind::hgr) {
      const nn::MlpGradients gg = g_.gradients(tape, b.g);
      if (!gg.all_finite()) throw NumericError("adversary: non-finite gradient");
      opt_g_.step(g_, gg, nn::Direction::ascend);
    }
  }

  /// J on the given sample without recording gradients for later use.
  [[nodiscard]] double evaluate(const nn::Matrix& u, const nn::Matrix& v,
                                const nn::Matrix* v_marginal = nullptr) const {
    nn::Tape t;
    const Bound b = bind(t);
    std::optional<nn::Var> vm;
    if (v_marginal != nullptr) vm = t.constant(*v_marginal);
    return t.scalar(objective(t, b, t.constant(u), t.constant(v), vm));
  }

 private:
  static nn::Var require(const std::optional<nn::Var>& v) {
    if (!v) throw InvalidArgument("adversary: objective needs marginal samples");
    return *v;
  }

  NeuralKind kind_;
  double epsilon_;
  nn::Mlp f_, g_;
  nn::Optimizer opt_f_, opt_g_;
};

namespace detail {

inline nn::Matrix column(const std::vector<double>& x, const std::vector<std::size_t>& idx) {
  nn::Matrix m(static_cast<Eigen::Index>(idx.size()), 1);
  for (std::size_t i = 0; i < idx.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[idx[i]];
  return m;
}

inline nn::Matrix column(const std::vector<double>& x) {
  nn::Matrix m(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
  return m;
}

/// Resamples, with replacement, rows of a (b x 1) column.
inline nn::Matrix resample_rows(const nn::Matrix& v, Rng& rng) {
  nn::Matrix out(v.rows(), 1);
  const auto n = static_cast<std::size_t>(v.rows());
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    out(i, 0) = v(static_cast<Eigen::Index>(rng.index(n)), 0);
  }
  return out;
}

/// Seed-shuffled pass over [0, n) in batches; reshuffles at each epoch end.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, Rng rng)
      : n_(n), batch_(batch), rng_(rng), order_(rng_.permutation(n)) {}

  std::vector<std::size_t> next() {
    if (pos_ + batch_ > n_) {
      order_ = rng_.permutation(n_);
      pos_ = 0;
    }
    std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
    pos_ += batch_;
    return idx;
  }

 private:
  std::size_t n_, batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Trains an adversary on (u, v) and evaluates J on the full sample.
/// Inputs are z-scored first; every objective is invariant to that map.
inline Estimate run_neural(NeuralKind kind, const SamplePairs& pairs,
                           const NeuralEstimatorConfig& cfg) {
  pairs.validate();
  if (pairs.size() < cfg.batch_size) {
    throw InvalidArgument(std::string(to_string(kind)) + ": sample size " +
                          std::to_string(pairs.size()) + " is smaller than batch size " +
                          std::to_string(cfg.batch_size));
  }
  const std::vector<double> u = stats::zscore(pairs.u);
  const std::vector<double> v = stats::zscore(pairs.v);
  Adversary adv(kind, cfg);
  Rng rng(cfg.seed, 0xE57);
  BatchSampler sampler(pairs.size(), cfg.batch_size, rng.split(1));
  Rng marginal_rng = rng.split(2);

  Estimate e;
  e.trace.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::vector<std::size_t> idx = sampler.next();
    const nn::Matrix ub = column(u, idx);
    const nn::Matrix vb = column(v, idx);
    nn::Tape t;
    const Adversary::Bound b = adv.bind(t);
    std::optional<nn::Var> vm;
    if (adv.needs_marginal()) vm = t.constant(resample_rows(vb, marginal_rng));
    const nn::Var j = adv.objective(t, b, t.constant(ub), t.constant(vb), vm);
    const double jv = t.scalar(j);
    if (!std::isfinite(jv)) {
      throw NumericError(std::string(to_string(kind)) + ": objective diverged at iteration " +
                         std::to_string(it));
    }
    e.trace.push_back(jv);
    t.backward(j);
    adv.ascend(t, b);
  }

  const nn::Matrix uf = column(u);
  const nn::Matrix vf = column(v);
  if (adv.needs_marginal()) {
    Rng final_rng = rng.split(3);
    const nn::Matrix vm = resample_rows(vf, final_rng);
    e.value = adv.evaluate(uf, vf, &vm);
  } else {
    e.value = adv.evaluate(uf, vf);
  }
  if (!std::isfinite(e.value)) {
    throw NumericError(std::string(to_string(kind)) + ": final evaluation is not finite");
  }
  e.diagnostics["iterations"] = static_cast<double>(cfg.iterations);
  e.diagnostics["final_batch_objective"] = e.trace.back();
  return e;
}

}  // namespace detail

/// Neural HGR: maximizes the correlation of batch-standardized f(u) and g(v).
/// The reported value standardizes on the full sample.
inline Estimate hgr_nn(const SamplePairs& pairs, const NeuralEstimatorConfig& cfg) {
  Estimate e = detail::run_neural(NeuralKind::hgr, pairs, cfg);
  e.diagnostics["negative"] = e.value < 0.0 ? 1.0 : 0.0;
  return e;
}

/// Neural lower bound on chi^2(P_UV, P_U x P_V).
inline Estimate chi2_nn(const SamplePairs& pairs, const NeuralEstimatorConfig& cfg) {
  return detail::run_neural(NeuralKind::chi2, pairs, cfg);
}

/// Donsker-Varadhan lower bound on I(U; V), in nats.
inline Estimate mine(const SamplePairs& pairs, const NeuralEstimatorConfig& cfg) {
  return detail::run_neural(NeuralKind::mine, pairs, cfg);
}

}  // namespace fairhgr::estimators
