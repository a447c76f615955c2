#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fairhgr/error.hpp"

namespace fairhgr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode recording of one forward computation over dense matrices.
///
/// Rows are batch samples and columns are features. Every op appends a node
/// holding its value; backward() replays the nodes in reverse order and
/// accumulates gradients into the nodes that depend on a leaf. A tape can be
/// replayed once.
class Tape {
 public:
  /// Value that never receives a gradient (data, targets).
  Var constant(Matrix value) {
    return push(Op::constant, {}, {}, std::move(value), false);
  }

  /// Value that receives a gradient (parameters, differentiable inputs).
  Var leaf(Matrix value) {
    return push(Op::leaf, {}, {}, std::move(value), true);
  }

  /// x * w^T, with w stored as (out x in).
  Var matmul(Var x, Var w) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    if (xv.cols() != wv.cols()) {
      throw InvalidArgument("matmul: input width " + std::to_string(xv.cols()) +
                            " does not match weight width " +
                            std::to_string(wv.cols()));
    }
    return push(Op::matmul, x, w, xv * wv.transpose());
  }

  /// Adds a (k x 1) bias to every row of a (b x k) value.
  Var add_bias(Var x, Var bias) {
    const Matrix& xv = value(x);
    const Matrix& bv = value(bias);
    if (bv.cols() != 1 || bv.rows() != xv.cols()) {
      throw InvalidArgument("add_bias: bias shape does not match input width");
    }
    Matrix out = xv.rowwise() + bv.col(0).transpose();
    return push(Op::add_bias, x, bias, std::move(out));
  }

  Var tanh(Var x) { return push(Op::tanh, x, {}, value(x).array().tanh().matrix()); }

  Var exp(Var x) { return push(Op::exp, x, {}, value(x).array().exp().matrix()); }

  Var log(Var x) {
    if ((value(x).array() <= 0.0).any()) {
      throw NumericError("log: non-positive argument");
    }
    return push(Op::log, x, {}, value(x).array().log().matrix());
  }

  Var square(Var x) { return push(Op::square, x, {}, value(x).array().square().matrix()); }

  /// Elementwise clamp; the gradient is zero where the bound is active.
  Var clamp(Var x, double lo, double hi) {
    Var out = push(Op::clamp, x, {}, value(x).cwiseMax(lo).cwiseMin(hi));
    nodes_[out.id].scalar = lo;
    nodes_[out.id].scalar2 = hi;
    return out;
  }

  /// Multiplies by a precomputed mask (inverted dropout: kept entries carry 1/(1-p)).
  Var dropout(Var x, Matrix mask) {
    if (mask.rows() != value(x).rows() || mask.cols() != value(x).cols()) {
      throw InvalidArgument("dropout: mask shape mismatch");
    }
    Matrix out = value(x).cwiseProduct(mask);
    Var v = push(Op::dropout, x, {}, std::move(out));
    nodes_[v.id].aux = std::move(mask);
    return v;
  }

  /// Column-wise (x - mean) / sqrt(var + eps) over the batch, population variance.
  Var standardize(Var x, double epsilon) {
    const Matrix& xv = value(x);
    if (xv.rows() < 2) {
      throw InvalidArgument("standardize: batch needs at least 2 rows");
    }
    const double b = static_cast<double>(xv.rows());
    Eigen::RowVectorXd mean = xv.colwise().sum() / b;
    Matrix centered = xv.rowwise() - mean;
    Eigen::RowVectorXd var = centered.array().square().colwise().sum() / b;
    Eigen::RowVectorXd denom = (var.array() + epsilon).sqrt();
    if (!(denom.array() > 0.0).all()) {
      throw NumericError("standardize: zero variance with epsilon = 0");
    }
    Eigen::RowVectorXd inv = denom.cwiseInverse();
    Matrix out = centered.array().rowwise() * inv.array();
    Var v = push(Op::standardize, x, {}, std::move(out));
    nodes_[v.id].aux = std::move(centered);
    nodes_[v.id].aux_row = std::move(inv);
    return v;
  }

  Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    return push(Op::mul, a, b, value(a).cwiseProduct(value(b)));
  }

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    return push(Op::add, a, b, value(a) + value(b));
  }

  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    return push(Op::sub, a, b, value(a) - value(b));
  }

  Var scale(Var x, double factor) {
    Var v = push(Op::scale, x, {}, value(x) * factor);
    nodes_[v.id].scalar = factor;
    return v;
  }

  /// Mean over all entries, producing a 1x1 value.
  Var mean(Var x) {
    Matrix out(1, 1);
    out(0, 0) = value(x).mean();
    return push(Op::mean, x, {}, std::move(out));
  }

  /// Places b's columns after a's columns.
  Var concat_cols(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows()) {
      throw InvalidArgument("concat_cols: row count mismatch");
    }
    Matrix out(av.rows(), av.cols() + bv.cols());
    out << av, bv;
    return push(Op::concat_cols, a, b, std::move(out));
  }

  [[nodiscard]] const Matrix& value(Var v) const { return node(v).value; }

  [[nodiscard]] double scalar(Var v) const {
    const Matrix& m = value(v);
    if (m.size() != 1) throw InvalidArgument("scalar: value is not 1x1");
    return m(0, 0);
  }

  /// Gradient of the last backward() root with respect to v, or zeros.
  [[nodiscard]] Matrix grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  [[nodiscard]] bool consumed() const { return consumed_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Back-propagates seed (shaped like root's value) from root.
  void backward(Var root, const Matrix& seed) {
    if (consumed_) throw InvalidArgument("backward: tape already consumed");
    Node& r = node_mut(root);
    if (seed.rows() != r.value.rows() || seed.cols() != r.value.cols()) {
      throw InvalidArgument("backward: seed shape does not match root value");
    }
    consumed_ = true;
    if (!r.requires_grad) return;
    r.grad = seed;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      propagate(n);
    }
  }

  /// backward() for a scalar root with unit seed.
  void backward(Var root) { backward(root, Matrix::Ones(1, 1)); }

 private:
  enum class Op {
    constant, leaf, matmul, add_bias, tanh, exp, log, square, clamp, dropout,
    standardize, mul, add, sub, scale, mean, concat_cols
  };

  struct Node {
    Op op;
    Var a, b;
    Matrix value;
    Matrix grad;
    Matrix aux;
    Eigen::RowVectorXd aux_row;
    double scalar = 0.0;
    double scalar2 = 0.0;
    bool requires_grad = false;
  };

  Var push(Op op, Var a, Var b, Matrix value) {
    bool rg = false;
    switch (op) {
      case Op::matmul: case Op::add_bias: case Op::mul: case Op::add:
      case Op::sub: case Op::concat_cols:
        rg = node(a).requires_grad || node(b).requires_grad;
        break;
      default:
        rg = node(a).requires_grad;
    }
    return push(op, a, b, std::move(value), rg);
  }

  Var push(Op op, Var a, Var b, Matrix value, bool requires_grad) {
    if (consumed_) throw InvalidArgument("tape already consumed");
    nodes_.push_back(Node{op, a, b, std::move(value), {}, {}, {}, 0.0, 0.0,
                          requires_grad});
    return Var{nodes_.size() - 1};
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw InvalidArgument("tape: unknown variable");
    return nodes_[v.id];
  }
  Node& node_mut(Var v) {
    if (v.id >= nodes_.size()) throw InvalidArgument("tape: unknown variable");
    return nodes_[v.id];
  }

  void check_same_shape(Var a, Var b, const char* what) const {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
      throw InvalidArgument(std::string(what) + ": shape mismatch");
    }
  }

  void accumulate(Var target, const Matrix& g) {
    Node& t = nodes_[target.id];
    if (!t.requires_grad) return;
    if (t.grad.size() == 0) {
      t.grad = g;
    } else {
      t.grad += g;
    }
  }

  void propagate(const Node& n) {
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::constant:
      case Op::leaf:
        break;
      case Op::matmul: {
        // y = x w^T: dx = g w, dw = g^T x
        if (nodes_[n.a.id].requires_grad) accumulate(n.a, g * value(n.b));
        if (nodes_[n.b.id].requires_grad) accumulate(n.b, g.transpose() * value(n.a));
        break;
      }
      case Op::add_bias:
        accumulate(n.a, g);
        if (nodes_[n.b.id].requires_grad) accumulate(n.b, g.colwise().sum().transpose());
        break;
      case Op::tanh:
        accumulate(n.a, (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::exp:
        accumulate(n.a, g.cwiseProduct(n.value));
        break;
      case Op::log:
        accumulate(n.a, g.cwiseQuotient(value(n.a)));
        break;
      case Op::square:
        accumulate(n.a, (2.0 * g.array() * value(n.a).array()).matrix());
        break;
      case Op::clamp: {
        const Matrix& x = value(n.a);
        Matrix d = g;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
          if (x(i) < n.scalar || x(i) > n.scalar2) d(i) = 0.0;
        }
        accumulate(n.a, d);
        break;
      }
      case Op::dropout:
        accumulate(n.a, g.cwiseProduct(n.aux));
        break;
      case Op::standardize: {
        // y = xc * s, s = (var + eps)^(-1/2):
        // dx = s (g - mean(g)) - s^3 xc mean(g xc)
        const double b = static_cast<double>(g.rows());
        Eigen::RowVectorXd g_mean = g.colwise().sum() / b;
        Eigen::RowVectorXd gx_mean = g.cwiseProduct(n.aux).colwise().sum() / b;
        Eigen::RowVectorXd s = n.aux_row;
        Eigen::RowVectorXd s3 = s.array().cube();
        Matrix d = (g.rowwise() - g_mean).array().rowwise() * s.array();
        d.array() -= n.aux.array().rowwise() * (s3.array() * gx_mean.array());
        accumulate(n.a, d);
        break;
      }
      case Op::mul:
        if (nodes_[n.a.id].requires_grad) accumulate(n.a, g.cwiseProduct(value(n.b)));
        if (nodes_[n.b.id].requires_grad) accumulate(n.b, g.cwiseProduct(value(n.a)));
        break;
      case Op::add:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::sub:
        accumulate(n.a, g);
        if (nodes_[n.b.id].requires_grad) accumulate(n.b, -g);
        break;
      case Op::scale:
        accumulate(n.a, g * n.scalar);
        break;
      case Op::mean: {
        const Matrix& x = value(n.a);
        accumulate(n.a, Matrix::Constant(x.rows(), x.cols(),
                                         g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::concat_cols: {
        const Eigen::Index ca = value(n.a).cols();
        const Eigen::Index cb = value(n.b).cols();
        if (nodes_[n.a.id].requires_grad) accumulate(n.a, g.leftCols(ca));
        if (nodes_[n.b.id].requires_grad) accumulate(n.b, g.rightCols(cb));
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace fairhgr::nn
