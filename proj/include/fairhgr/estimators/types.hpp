#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairhgr/error.hpp"
#include "fairhgr/nn/mlp.hpp"
#include "fairhgr/nn/optimizer.hpp"

namespace fairhgr::estimators {

/// Paired scalar realizations (u_i, v_i).
struct SamplePairs {
  std::vector<double> u;
  std::vector<double> v;

  [[nodiscard]] std::size_t size() const { return u.size(); }

  void validate() const {
    if (u.size() != v.size()) throw InvalidArgument("SamplePairs: u and v lengths differ");
    if (u.size() < 2) throw InvalidArgument("SamplePairs: need at least 2 pairs");
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
        throw InvalidArgument("SamplePairs: non-finite value at index " + std::to_string(i));
      }
    }
  }

  [[nodiscard]] SamplePairs swapped() const { return {v, u}; }
};

/// Scalar result of an estimator plus diagnostics.
struct Estimate {
  double value = 0.0;
  std::map<std::string, double> diagnostics;
  std::vector<double> trace;
  std::vector<double> singular_values;
};

/// Hyperparameters for the neural estimators. f sees u (hgr) or (u, v)
/// (chi2, mine); g is used by hgr only.
struct NeuralEstimatorConfig {
  std::vector<nn::LayerSpec> f_layers;
  std::vector<nn::LayerSpec> g_layers;
  nn::OptimizerConfig f_optimizer;
  nn::OptimizerConfig g_optimizer;
  std::size_t batch_size = 256;
  std::size_t iterations = 3000;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate(std::size_t f_input_width) const {
    if (f_layers.empty()) throw InvalidArgument("estimator: f_layers is empty");
    if (f_layers.front().input_width != f_input_width) {
      throw InvalidArgument("estimator: f input width must be " +
                            std::to_string(f_input_width));
    }
    if (iterations < 1) throw InvalidArgument("estimator: iterations must be >= 1");
    if (batch_size < 2) throw InvalidArgument("estimator: batch_size must be >= 2");
    if (!(epsilon >= 0.0)) throw InvalidArgument("estimator: epsilon must be >= 0");
  }
};

/// Two networks of 3 hidden tanh layers with 10 units each.
inline NeuralEstimatorConfig hgr_nn_defaults(std::uint64_t seed = 0) {
  NeuralEstimatorConfig c;
  c.f_layers = nn::dense_stack(1, 3, 10);
  c.g_layers = nn::dense_stack(1, 3, 10);
  c.f_optimizer.learning_rate = 2e-2;
  c.g_optimizer.learning_rate = 2e-2;
  c.batch_size = 256;
  c.iterations = 1000;
  c.seed = seed;
  return c;
}

/// One network of 3 hidden tanh layers with 32 units on (u, v).
inline NeuralEstimatorConfig chi2_nn_defaults(std::uint64_t seed = 0) {
  NeuralEstimatorConfig c;
  c.f_layers = nn::dense_stack(2, 3, 32);
  c.f_optimizer.learning_rate = 1e-3;
  c.batch_size = 256;
  c.iterations = 3000;
  c.seed = seed;
  return c;
}

inline NeuralEstimatorConfig mine_defaults(std::uint64_t seed = 0) {
  NeuralEstimatorConfig c = chi2_nn_defaults(seed);
  return c;
}

enum class BandwidthRule { silverman, fixed };

struct KdeConfig {
  std::size_t grid_size = 64;
  BandwidthRule bandwidth_rule = BandwidthRule::silverman;
  double fixed_bandwidth = 0.0;
  double grid_padding = 3.0;

  void validate() const {
    if (grid_size < 8) throw InvalidArgument("kde: grid_size must be >= 8");
    if (bandwidth_rule == BandwidthRule::fixed && !(fixed_bandwidth > 0.0)) {
      throw InvalidArgument("kde: fixed bandwidth must be positive");
    }
    if (!(grid_padding >= 0.0)) throw InvalidArgument("kde: grid_padding must be >= 0");
  }
};

struct RdcConfig {
  std::size_t k = 20;
  double scale = 1.0 / 6.0;
  std::uint64_t seed = 0;
};

}  // namespace fairhgr::estimators
