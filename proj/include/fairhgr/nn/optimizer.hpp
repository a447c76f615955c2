#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fairhgr/error.hpp"
#include "fairhgr/nn/mlp.hpp"

namespace fairhgr::nn {

enum class OptimizerKind { sgd, adam };
enum class Direction { descend, ascend };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD or Adam state for one network.
class Optimizer {
 public:
  Optimizer() = default;

  Optimizer(OptimizerConfig config, const Mlp& mlp) : config_(config) {
    if (!(config_.learning_rate > 0.0)) {
      throw InvalidArgument("optimizer: learning rate must be positive");
    }
    for (const auto& w : mlp.weights()) {
      m_w_.push_back(Matrix::Zero(w.rows(), w.cols()));
      v_w_.push_back(Matrix::Zero(w.rows(), w.cols()));
    }
    for (const auto& b : mlp.biases()) {
      m_b_.push_back(Vector::Zero(b.size()));
      v_b_.push_back(Vector::Zero(b.size()));
    }
  }

  [[nodiscard]] const OptimizerConfig& config() const { return config_; }
  [[nodiscard]] std::uint64_t steps() const { return steps_; }

  void step(Mlp& mlp, const MlpGradients& grads, Direction direction) {
    auto& ws = mlp.weights();
    auto& bs = mlp.biases();
    if (grads.weights.size() != ws.size() || grads.biases.size() != bs.size() ||
        m_w_.size() != ws.size()) {
      throw InvalidArgument("optimizer: gradient layer count mismatch");
    }
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (grads.weights[i].rows() != ws[i].rows() ||
          grads.weights[i].cols() != ws[i].cols() ||
          grads.biases[i].size() != bs[i].size()) {
        throw InvalidArgument("optimizer: gradient shape mismatch at layer " +
                              std::to_string(i));
      }
    }
    ++steps_;
    const double sign = direction == Direction::ascend ? 1.0 : -1.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      update(ws[i], grads.weights[i], m_w_[i], v_w_[i], sign);
      update(bs[i], grads.biases[i], m_b_[i], v_b_[i], sign);
    }
  }

 private:
  template <typename Param>
  void update(Param& p, const Param& g, Param& m, Param& v, double sign) const {
    const double lr = config_.learning_rate;
    if (config_.kind == OptimizerKind::sgd) {
      p += (sign * lr) * g;
      return;
    }
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseAbs2();
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    p.array() += (sign * lr) * (m.array() / c1) /
                 ((v.array() / c2).sqrt() + config_.epsilon);
  }

  OptimizerConfig config_;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
  std::uint64_t steps_ = 0;
};

}  // namespace fairhgr::nn
