#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairhgr/error.hpp"
#include "fairhgr/nn/tape.hpp"
#include "fairhgr/rng.hpp"

namespace fairhgr::nn {

enum class Activation { tanh, identity };

struct LayerSpec {
  std::size_t input_width = 1;
  std::size_t output_width = 1;
  Activation activation = Activation::tanh;
  double dropout_rate = 0.0;
};

/// Fully connected stack: `hidden` tanh layers of `units` width, then a linear
/// output layer.
inline std::vector<LayerSpec> dense_stack(std::size_t input_width, std::size_t hidden,
                                          std::size_t units, std::size_t output_width = 1,
                                          double dropout_rate = 0.0) {
  std::vector<LayerSpec> layers;
  std::size_t in = input_width;
  for (std::size_t i = 0; i < hidden; ++i) {
    layers.push_back({in, units, Activation::tanh, dropout_rate});
    in = units;
  }
  layers.push_back({in, output_width, Activation::identity, 0.0});
  return layers;
}

/// Parameters of one Mlp registered on a tape.
struct MlpBinding {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

/// Gradients shaped like an Mlp's parameters.
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  [[nodiscard]] bool all_finite() const {
    for (const auto& w : weights) {
      if (!w.allFinite()) return false;
    }
    for (const auto& b : biases) {
      if (!b.allFinite()) return false;
    }
    return true;
  }
};

/// Dense network with Xavier-uniform weights and zero biases.
///
/// Weights are stored (output_width x input_width); a batch is a (rows x
/// input_width) matrix. Dropout is inverted, so the inference path is the
/// plain affine/activation chain.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<LayerSpec> layers, std::uint64_t seed) : layers_(std::move(layers)) {
    if (layers_.empty()) throw InvalidArgument("Mlp: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = layers_[i];
      if (l.input_width == 0 || l.output_width == 0) {
        throw InvalidArgument("Mlp: layer " + std::to_string(i) + " has zero width");
      }
      if (!(l.dropout_rate >= 0.0 && l.dropout_rate < 1.0)) {
        throw InvalidArgument("Mlp: layer " + std::to_string(i) +
                              " dropout rate must lie in [0, 1)");
      }
      if (i > 0 && layers_[i - 1].output_width != l.input_width) {
        throw InvalidArgument("Mlp: layer " + std::to_string(i - 1) + " outputs " +
                              std::to_string(layers_[i - 1].output_width) +
                              " but layer " + std::to_string(i) + " expects " +
                              std::to_string(l.input_width));
      }
    }
    Rng rng(seed, 0x1417);
    for (const LayerSpec& l : layers_) {
      const double bound =
          std::sqrt(6.0 / static_cast<double>(l.input_width + l.output_width));
      Matrix w(l.output_width, l.input_width);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
      }
      weights_.push_back(std::move(w));
      biases_.push_back(Vector::Zero(static_cast<Eigen::Index>(l.output_width)));
    }
  }

  [[nodiscard]] const std::vector<LayerSpec>& layers() const { return layers_; }
  [[nodiscard]] const std::vector<Matrix>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<Vector>& biases() const { return biases_; }
  std::vector<Matrix>& weights() { return weights_; }
  std::vector<Vector>& biases() { return biases_; }

  [[nodiscard]] std::size_t input_width() const { return layers_.front().input_width; }
  [[nodiscard]] std::size_t output_width() const { return layers_.back().output_width; }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      n += static_cast<std::size_t>(weights_[i].size() + biases_[i].size());
    }
    return n;
  }

  [[nodiscard]] MlpBinding bind(Tape& tape) const {
    MlpBinding b;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      b.weights.push_back(tape.leaf(weights_[i]));
      b.biases.push_back(tape.leaf(biases_[i]));
    }
    return b;
  }

  /// Records the network applied to x. Dropout masks are drawn from
  /// dropout_rng only when training is set.
  Var apply(Tape& tape, const MlpBinding& params, Var x, bool training,
            Rng* dropout_rng = nullptr) const {
    const Matrix& in = tape.value(x);
    if (static_cast<std::size_t>(in.cols()) != input_width()) {
      throw InvalidArgument("Mlp: input has " + std::to_string(in.cols()) +
                            " columns, network expects " +
                            std::to_string(input_width()));
    }
    if (!in.allFinite()) throw NumericError("Mlp: non-finite input");
    Var h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = tape.add_bias(tape.matmul(h, params.weights[i]), params.biases[i]);
      if (layers_[i].activation == Activation::tanh) h = tape.tanh(h);
      const double p = layers_[i].dropout_rate;
      if (training && p > 0.0) {
        if (dropout_rng == nullptr) throw InvalidArgument("Mlp: dropout needs an rng");
        const Matrix& hv = tape.value(h);
        Matrix mask(hv.rows(), hv.cols());
        const double keep = 1.0 / (1.0 - p);
        for (Eigen::Index k = 0; k < mask.size(); ++k) {
          mask(k) = dropout_rng->uniform() < p ? 0.0 : keep;
        }
        h = tape.dropout(h, std::move(mask));
      }
    }
    return h;
  }

  /// Inference-mode evaluation without recording gradients.
  [[nodiscard]] Matrix predict(const Matrix& batch) const {
    if (static_cast<std::size_t>(batch.cols()) != input_width()) {
      throw InvalidArgument("Mlp: input has " + std::to_string(batch.cols()) +
                            " columns, network expects " +
                            std::to_string(input_width()));
    }
    if (!batch.allFinite()) throw NumericError("Mlp: non-finite input");
    Matrix h = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = h * weights_[i].transpose();
      z.rowwise() += biases_[i].transpose();
      if (layers_[i].activation == Activation::tanh) z = z.array().tanh().matrix();
      h = std::move(z);
    }
    return h;
  }

  [[nodiscard]] MlpGradients gradients(const Tape& tape, const MlpBinding& params) const {
    MlpGradients g;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      g.weights.push_back(tape.grad(params.weights[i]));
      g.biases.push_back(tape.grad(params.biases[i]).col(0));
    }
    return g;
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.weights_.size() != b.weights_.size()) return false;
    for (std::size_t i = 0; i < a.weights_.size(); ++i) {
      if (a.weights_[i].rows() != b.weights_[i].rows() ||
          a.weights_[i].cols() != b.weights_[i].cols() ||
          a.weights_[i] != b.weights_[i] || a.biases_[i] != b.biases_[i]) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// One recorded forward pass of a single network.
struct Forward {
  Tape tape;
  MlpBinding params;
  Var input;
  Var output;

  [[nodiscard]] const Matrix& outputs() const { return tape.value(output); }
};

inline Forward forward(const Mlp& mlp, const Matrix& batch, bool training,
                       std::uint64_t seed) {
  Forward f;
  f.params = mlp.bind(f.tape);
  f.input = f.tape.constant(batch);
  Rng rng(seed, 0xD809);
  f.output = mlp.apply(f.tape, f.params, f.input, training, &rng);
  if (!f.outputs().allFinite()) throw NumericError("forward: non-finite output");
  return f;
}

/// Gradients of sum(output_grad .* outputs) with respect to mlp's parameters.
inline MlpGradients backward(const Mlp& mlp, Forward& f, const Matrix& output_grad) {
  f.tape.backward(f.output, output_grad);
  MlpGradients g = mlp.gradients(f.tape, f.params);
  if (!g.all_finite()) throw NumericError("backward: non-finite gradient");
  return g;
}

}  // namespace fairhgr::nn
