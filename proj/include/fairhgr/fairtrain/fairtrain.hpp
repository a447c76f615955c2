#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairhgr/data/dataset.hpp"
#include "fairhgr/error.hpp"
#include "fairhgr/estimators/neural.hpp"
#include "fairhgr/estimators/types.hpp"
#include "fairhgr/nn/mlp.hpp"
#include "fairhgr/nn/optimizer.hpp"
#include "fairhgr/rng.hpp"

namespace fairhgr::fairtrain {

enum class FairnessMode { demographic_parity, equalized_residuals };
enum class PenaltyKind { hgr_nn, chi2_nn, mine, pearson, none };

inline const char* to_string(FairnessMode m) {
  return m == FairnessMode::demographic_parity ? "demographic_parity" : "equalized_residuals";
}

inline const char* to_string(PenaltyKind p) {
  switch (p) {
    case PenaltyKind::hgr_nn: return "hgr_nn";
    case PenaltyKind::chi2_nn: return "chi2_nn";
    case PenaltyKind::mine: return "mine";
    case PenaltyKind::pearson: return "pearson";
    case PenaltyKind::none: return "none";
  }
  return "?";
}

inline FairnessMode parse_mode(const std::string& s) {
  if (s == "demographic_parity" || s == "dp") return FairnessMode::demographic_parity;
  if (s == "equalized_residuals" || s == "er") return FairnessMode::equalized_residuals;
  throw InvalidArgument("unknown fairness mode '" + s + "'");
}

inline PenaltyKind parse_penalty(const std::string& s) {
  if (s == "hgr_nn") return PenaltyKind::hgr_nn;
  if (s == "chi2_nn") return PenaltyKind::chi2_nn;
  if (s == "mine") return PenaltyKind::mine;
  if (s == "pearson") return PenaltyKind::pearson;
  if (s == "none") return PenaltyKind::none;
  throw InvalidArgument("unknown penalty '" + s + "'");
}

/// U = yhat for demographic parity, U = yhat - y for equalized residuals; V = s.
inline estimators::SamplePairs select_uv(FairnessMode mode, const std::vector<double>& yhat,
                                         const std::vector<double>& y,
                                         const std::vector<double>& s) {
  if (yhat.size() != s.size() ||
      (mode == FairnessMode::equalized_residuals && y.size() != yhat.size())) {
    throw InvalidArgument("select_uv: length mismatch");
  }
  estimators::SamplePairs p;
  p.v = s;
  p.u = yhat;
  if (mode == FairnessMode::equalized_residuals) {
    for (std::size_t i = 0; i < yhat.size(); ++i) p.u[i] = yhat[i] - y[i];
  }
  return p;
}

struct FairTrainConfig {
  FairnessMode mode = FairnessMode::demographic_parity;
  PenaltyKind penalty = PenaltyKind::none;
  double lambda = 0.0;
  /// Empty: predictor_hidden tanh layers of predictor_units, linear output.
  std::vector<nn::LayerSpec> predictor_layers;
  std::size_t predictor_hidden = 3;
  std::size_t predictor_units = 8;
  double predictor_dropout = 0.0;
  nn::OptimizerConfig predictor_optimizer{nn::OptimizerKind::adam, 1e-3};
  /// Adversary networks and learning rates; empty f_layers selects the
  /// estimator defaults for the penalty.
  estimators::NeuralEstimatorConfig adversary;
  std::size_t batch_size = 128;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  double epsilon = 1e-8;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("fairtrain: lambda must be >= 0");
    if (batch_size < 2) throw InvalidArgument("fairtrain: batch_size must be >= 2");
    if (epochs < 1) throw InvalidArgument("fairtrain: epochs must be >= 1");
    if (!(epsilon >= 0.0)) throw InvalidArgument("fairtrain: epsilon must be >= 0");
  }
};

struct EpochRecord {
  double train_mse = 0.0;
  double penalty = 0.0;
  double weighted_penalty = 0.0;
};

/// Frozen z-score statistics of the training split.
struct Normalization {
  std::vector<double> x_mean, x_std;
  double y_mean = 0.0, y_std = 1.0;
  double s_mean = 0.0, s_std = 1.0;

  static Normalization fit(const data::Dataset& d) {
    Normalization n;
    const double rows = static_cast<double>(d.rows());
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
      const double m = d.x.col(j).mean();
      const double var = (d.x.col(j).array() - m).square().sum() / rows;
      n.x_mean.push_back(m);
      n.x_std.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
    }
    auto moments = [&](const std::vector<double>& v, double& mean, double& sd) {
      mean = 0.0;
      for (double a : v) mean += a;
      mean /= rows;
      double var = 0.0;
      for (double a : v) var += (a - mean) * (a - mean);
      var /= rows;
      sd = var > 0.0 ? std::sqrt(var) : 1.0;
    };
    moments(d.y, n.y_mean, n.y_std);
    moments(d.s, n.s_mean, n.s_std);
    return n;
  }

  [[nodiscard]] nn::Matrix features(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != x_mean.size()) {
      throw InvalidArgument("feature width " + std::to_string(x.cols()) + " does not match model (" +
                            std::to_string(x_mean.size()) + ")");
    }
    nn::Matrix out = x;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      out.col(j) = (out.col(j).array() - x_mean[k]) / x_std[k];
    }
    return out;
  }

  [[nodiscard]] std::vector<double> target(const std::vector<double>& y) const {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - y_mean) / y_std;
    return out;
  }

  [[nodiscard]] std::vector<double> sensitive(const std::vector<double>& s) const {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - s_mean) / s_std;
    return out;
  }
};

struct TrainedModel {
  nn::Mlp predictor;
  std::vector<EpochRecord> history;
  FairTrainConfig config;
  Normalization normalization;
};

inline std::vector<nn::LayerSpec> predictor_layers(const FairTrainConfig& cfg,
                                                   std::size_t features) {
  if (!cfg.predictor_layers.empty()) return cfg.predictor_layers;
  return nn::dense_stack(features, cfg.predictor_hidden, cfg.predictor_units, 1,
                         cfg.predictor_dropout);
}

/// Estimator networks and rates for the penalty's adversary. The hgr adversary
/// steps at 5e-3 rather than the estimator's 2e-2: against a moving predictor
/// the larger step lets it lag behind and the penalty stops biting.
inline estimators::NeuralEstimatorConfig default_adversary(PenaltyKind p) {
  if (p != PenaltyKind::hgr_nn) return estimators::chi2_nn_defaults();
  estimators::NeuralEstimatorConfig a = estimators::hgr_nn_defaults();
  a.f_optimizer.learning_rate = 5e-3;
  a.g_optimizer.learning_rate = 5e-3;
  return a;
}

inline estimators::NeuralEstimatorConfig adversary_config(const FairTrainConfig& cfg) {
  estimators::NeuralEstimatorConfig a = cfg.adversary;
  if (a.f_layers.empty()) {
    const estimators::NeuralEstimatorConfig d = default_adversary(cfg.penalty);
    a.f_layers = d.f_layers;
    a.g_layers = d.g_layers;
    a.f_optimizer = d.f_optimizer;
    a.g_optimizer = d.g_optimizer;
  }
  a.epsilon = cfg.epsilon;
  a.seed = Rng(cfg.seed, 0xAD5).next_u64();
  return a;
}

/// One training minibatch, already normalized. marginal holds, for chi2 and
/// mine, the batch positions whose s values form the product-of-marginals sample.
struct Batch {
  nn::Matrix x;
  nn::Matrix y;
  nn::Matrix s;
  std::vector<std::size_t> marginal;
};

/// Alternating adversary-ascent / predictor-descent steps of the fair
/// objective L = MSE + lambda * J.
class FairTrainer {
 public:
  FairTrainer(const FairTrainConfig& cfg, std::size_t features)
      : cfg_(cfg),
        predictor_(predictor_layers(cfg, features), Rng(cfg.seed, 0x9ED).next_u64()),
        predictor_opt_(cfg.predictor_optimizer, predictor_),
        dropout_rng_(cfg.seed, 0xD80),
        marginal_rng_(cfg.seed, 0x3A6) {
    cfg_.validate();
    if (predictor_.input_width() != features) {
      throw InvalidArgument("fairtrain: predictor input width does not match features");
    }
    if (predictor_.output_width() != 1) {
      throw InvalidArgument("fairtrain: predictor must have a scalar output");
    }
    if (auto kind = neural_kind()) adversary_.emplace(*kind, adversary_config(cfg_));
  }

  [[nodiscard]] const nn::Mlp& predictor() const { return predictor_; }
  [[nodiscard]] const std::optional<estimators::Adversary>& adversary() const { return adversary_; }
  [[nodiscard]] const FairTrainConfig& config() const { return cfg_; }

  /// Draws within-batch marginal positions when the penalty needs them.
  void attach_marginal(Batch& batch) {
    batch.marginal.clear();
    if (!adversary_ || !adversary_->needs_marginal()) return;
    const auto b = static_cast<std::size_t>(batch.s.rows());
    for (std::size_t i = 0; i < b; ++i) batch.marginal.push_back(marginal_rng_.index(b));
  }

  /// Gradient ascent on the adversary with the predictor frozen. Returns J
  /// before the step (0 without an adversary).
  double adversary_step(const Batch& batch) {
    if (!adversary_) return 0.0;
    const nn::Matrix yhat = predictor_.predict(batch.x);
    nn::Tape t;
    const estimators::Adversary::Bound b = adversary_->bind(t);
    const nn::Var u = t.standardize(t.constant(dependent(yhat, batch.y)), cfg_.epsilon);
    const nn::Var v = t.constant(batch.s);
    std::optional<nn::Var> vm;
    if (adversary_->needs_marginal()) vm = t.constant(gather(batch.s, batch.marginal));
    const nn::Var j = adversary_->objective(t, b, u, v, vm);
    const double jv = t.scalar(j);
    if (!std::isfinite(jv)) throw NumericError("fairtrain: adversary objective is not finite");
    t.backward(j);
    adversary_->ascend(t, b);
    return jv;
  }

  struct PredictorStep {
    double mse = 0.0;
    double penalty = 0.0;
  };

  /// Gradient descent on the predictor with the adversary frozen.
  PredictorStep predictor_step(const Batch& batch) {
    nn::Tape t;
    const nn::MlpBinding pb = predictor_.bind(t);
    const nn::Var yhat = predictor_.apply(t, pb, t.constant(batch.x), true, &dropout_rng_);
    const nn::Var y = t.constant(batch.y);
    const nn::Var mse = t.mean(t.square(t.sub(yhat, y)));
    PredictorStep out;
    nn::Var loss = mse;
    if (cfg_.penalty != PenaltyKind::none && cfg_.lambda > 0.0) {
      const nn::Var j = penalty(t, yhat, y, batch);
      out.penalty = t.scalar(j);
      loss = t.add(mse, t.scale(j, cfg_.lambda));
    } else if (cfg_.penalty == PenaltyKind::pearson) {
      out.penalty = pearson_squared(predictor_.predict(batch.x), batch);
    }
    out.mse = t.scalar(mse);
    const double lv = t.scalar(loss);
    if (!std::isfinite(lv)) throw NumericError("fairtrain: loss is not finite");
    t.backward(loss);
    const nn::MlpGradients g = predictor_.gradients(t, pb);
    if (!g.all_finite()) throw NumericError("fairtrain: non-finite predictor gradient");
    predictor_opt_.step(predictor_, g, nn::Direction::descend);
    return out;
  }

 private:
  [[nodiscard]] std::optional<estimators::NeuralKind> neural_kind() const {
    switch (cfg_.penalty) {
      case PenaltyKind::hgr_nn: return estimators::NeuralKind::hgr;
      case PenaltyKind::chi2_nn: return estimators::NeuralKind::chi2;
      case PenaltyKind::mine: return estimators::NeuralKind::mine;
      default: return std::nullopt;
    }
  }

  [[nodiscard]] nn::Matrix dependent(const nn::Matrix& yhat, const nn::Matrix& y) const {
    return cfg_.mode == FairnessMode::equalized_residuals ? nn::Matrix(yhat - y) : yhat;
  }

  static nn::Matrix gather(const nn::Matrix& col, const std::vector<std::size_t>& idx) {
    nn::Matrix out(static_cast<Eigen::Index>(idx.size()), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out(static_cast<Eigen::Index>(i), 0) = col(static_cast<Eigen::Index>(idx[i]), 0);
    }
    return out;
  }

  nn::Var penalty(nn::Tape& t, nn::Var yhat, nn::Var y, const Batch& batch) const {
    const nn::Var u = cfg_.mode == FairnessMode::equalized_residuals ? t.sub(yhat, y) : yhat;
    const nn::Var v = t.constant(batch.s);
    if (cfg_.penalty == PenaltyKind::pearson) {
      const nn::Var r = t.mean(t.mul(t.standardize(u, cfg_.epsilon), t.standardize(v, cfg_.epsilon)));
      return t.square(r);
    }
    // The adversary sees batch-standardized U, as the estimators see z-scored
    // inputs; residuals are otherwise orders of magnitude below unit scale.
    const estimators::Adversary::Bound b = adversary_->bind(t);
    std::optional<nn::Var> vm;
    if (adversary_->needs_marginal()) vm = t.constant(gather(batch.s, batch.marginal));
    return adversary_->objective(t, b, t.standardize(u, cfg_.epsilon), v, vm);
  }

  [[nodiscard]] double pearson_squared(const nn::Matrix& yhat, const Batch& batch) const {
    nn::Tape t;
    const nn::Var u = t.constant(dependent(yhat, batch.y));
    const nn::Var v = t.constant(batch.s);
    const nn::Var r = t.mean(t.mul(t.standardize(u, cfg_.epsilon), t.standardize(v, cfg_.epsilon)));
    return t.scalar(t.square(r));
  }

  FairTrainConfig cfg_;
  nn::Mlp predictor_;
  nn::Optimizer predictor_opt_;
  std::optional<estimators::Adversary> adversary_;
  Rng dropout_rng_;
  Rng marginal_rng_;
};

/// Trains a predictor on the dataset; one epoch is floor(n / b) batches over a
/// reshuffled training set, each batch taking one adversary step and then one
/// predictor step.
inline TrainedModel train_fair(const data::Dataset& dataset, const FairTrainConfig& cfg) {
  cfg.validate();
  dataset.validate();
  if (dataset.rows() == 0) throw InvalidArgument("train_fair: empty dataset");
  if (dataset.rows() < 2 * cfg.batch_size) {
    throw InvalidArgument("train_fair: need at least 2 * batch_size rows, have " +
                          std::to_string(dataset.rows()));
  }
  TrainedModel model;
  model.config = cfg;
  model.normalization = Normalization::fit(dataset);
  const nn::Matrix x = model.normalization.features(dataset.x);
  const std::vector<double> y = model.normalization.target(dataset.y);
  const std::vector<double> s = model.normalization.sensitive(dataset.s);

  FairTrainer trainer(cfg, dataset.features());
  Rng shuffle_rng(cfg.seed, 0x5F1);
  const std::size_t n = dataset.rows();
  const std::size_t batches = n / cfg.batch_size;
  const bool adversarial = trainer.adversary().has_value();

  Batch batch;
  batch.x.resize(static_cast<Eigen::Index>(cfg.batch_size), x.cols());
  batch.y.resize(static_cast<Eigen::Index>(cfg.batch_size), 1);
  batch.s.resize(static_cast<Eigen::Index>(cfg.batch_size), 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffle_rng.permutation(n);
    EpochRecord rec;
    try {
      for (std::size_t k = 0; k < batches; ++k) {
        for (std::size_t i = 0; i < cfg.batch_size; ++i) {
          const std::size_t r = order[k * cfg.batch_size + i];
          const auto row = static_cast<Eigen::Index>(i);
          batch.x.row(row) = x.row(static_cast<Eigen::Index>(r));
          batch.y(row, 0) = y[r];
          batch.s(row, 0) = s[r];
        }
        trainer.attach_marginal(batch);
        const double j_adv = trainer.adversary_step(batch);
        const FairTrainer::PredictorStep step = trainer.predictor_step(batch);
        rec.train_mse += step.mse;
        rec.penalty += adversarial ? j_adv : step.penalty;
      }
    } catch (const NumericError& e) {
      throw NumericError("train_fair: epoch " + std::to_string(epoch) + ": " + e.what());
    }
    rec.train_mse /= static_cast<double>(batches);
    rec.penalty /= static_cast<double>(batches);
    rec.weighted_penalty = cfg.lambda * rec.penalty;
    if (!std::isfinite(rec.train_mse) || !std::isfinite(rec.penalty)) {
      throw NumericError("train_fair: non-finite loss at epoch " + std::to_string(epoch));
    }
    model.history.push_back(rec);
  }
  model.predictor = trainer.predictor();
  return model;
}

/// Predictions in standardized target units.
inline std::vector<double> predict(const TrainedModel& model, const Eigen::MatrixXd& x) {
  const nn::Matrix out = model.predictor.predict(model.normalization.features(x));
  std::vector<double> yhat(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) yhat[static_cast<std::size_t>(i)] = out(i, 0);
  return yhat;
}

/// Predictions mapped back to the original target units.
inline std::vector<double> predict_original_units(const TrainedModel& model,
                                                  const Eigen::MatrixXd& x) {
  std::vector<double> yhat = predict(model, x);
  for (double& v : yhat) v = v * model.normalization.y_std + model.normalization.y_mean;
  return yhat;
}

}  // namespace fairhgr::fairtrain
