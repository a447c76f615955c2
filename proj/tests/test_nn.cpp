#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fairhgr/nn/mlp.hpp"
#include "fairhgr/nn/optimizer.hpp"
#include "fairhgr/nn/standardize.hpp"
#include "fairhgr/nn/tape.hpp"
#include "fairhgr/rng.hpp"
#include "gradient_check.hpp"

namespace nn = fairhgr::nn;
using fairhgr::Rng;

namespace {

nn::Mlp identity_net(double w) {
  nn::Mlp m({{1, 1, nn::Activation::identity, 0.0}}, 0);
  m.weights()[0](0, 0) = w;
  return m;
}

}  // namespace

TEST(Mlp, XavierBoundForOneByOne) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const nn::Mlp m({{1, 1, nn::Activation::identity, 0.0}}, seed);
    EXPECT_LE(std::abs(m.weights()[0](0, 0)), std::sqrt(3.0));
    EXPECT_EQ(m.biases()[0](0), 0.0);
  }
}

TEST(Mlp, SameSeedSameWeights) {
  const auto layers = nn::dense_stack(3, 2, 8);
  EXPECT_TRUE(nn::Mlp(layers, 11) == nn::Mlp(layers, 11));
  EXPECT_FALSE(nn::Mlp(layers, 11) == nn::Mlp(layers, 12));
}

TEST(Mlp, ShapesOfTwoLayerNet) {
  const nn::Mlp m({{2, 3, nn::Activation::tanh, 0.0}, {3, 1, nn::Activation::identity, 0.0}}, 7);
  ASSERT_EQ(m.weights().size(), 2u);
  EXPECT_EQ(m.weights()[0].rows(), 3);
  EXPECT_EQ(m.weights()[0].cols(), 2);
  EXPECT_EQ(m.weights()[1].rows(), 1);
  EXPECT_EQ(m.weights()[1].cols(), 3);
  EXPECT_TRUE(m.weights()[0].allFinite());
  EXPECT_EQ(m.parameter_count(), 3u * 2 + 3 + 3 + 1);
}

TEST(Mlp, EveryWeightWithinXavierRange) {
  const nn::Mlp m(nn::dense_stack(5, 3, 17), 3);
  for (std::size_t l = 0; l < m.layers().size(); ++l) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(m.layers()[l].input_width + m.layers()[l].output_width));
    EXPECT_LE(m.weights()[l].cwiseAbs().maxCoeff(), bound);
  }
}

TEST(Mlp, RejectsBadLayers) {
  EXPECT_THROW(nn::Mlp({{2, 3, nn::Activation::tanh, 0.0}, {4, 1, nn::Activation::identity, 0.0}}, 0),
               fairhgr::InvalidArgument);
  EXPECT_THROW(nn::Mlp({{0, 3, nn::Activation::tanh, 0.0}}, 0), fairhgr::InvalidArgument);
  EXPECT_THROW(nn::Mlp({{1, 3, nn::Activation::tanh, 1.0}}, 0), fairhgr::InvalidArgument);
  EXPECT_THROW(nn::Mlp({}, 0), fairhgr::InvalidArgument);
}

TEST(Forward, IdentityNet) {
  const nn::Mlp m = identity_net(1.0);
  const nn::Forward f = nn::forward(m, nn::Matrix::Constant(1, 1, 2.0), false, 0);
  EXPECT_EQ(f.outputs()(0, 0), 2.0);
}

TEST(Forward, ZeroTanhLayerGivesZeros) {
  nn::Mlp m({{2, 4, nn::Activation::tanh, 0.0}}, 1);
  m.weights()[0].setZero();
  const nn::Matrix out = m.predict(nn::Matrix::Random(5, 2));
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, DropoutBypassedAtInference) {
  const auto with = nn::dense_stack(2, 2, 6, 1, 0.5);
  const auto without = nn::dense_stack(2, 2, 6, 1, 0.0);
  const nn::Matrix x = nn::Matrix::Random(7, 2);
  const nn::Forward a = nn::forward(nn::Mlp(with, 4), x, false, 9);
  const nn::Forward b = nn::forward(nn::Mlp(without, 4), x, false, 9);
  EXPECT_TRUE(a.outputs() == b.outputs());
}

TEST(Forward, DropoutInTrainingIsInvertedAndSeeded) {
  const nn::Mlp m(nn::dense_stack(2, 2, 64, 1, 0.5), 4);
  const nn::Matrix x = nn::Matrix::Random(32, 2);
  const nn::Forward a = nn::forward(m, x, true, 3);
  const nn::Forward b = nn::forward(m, x, true, 3);
  const nn::Forward c = nn::forward(m, x, true, 4);
  EXPECT_TRUE(a.outputs() == b.outputs());
  EXPECT_FALSE(a.outputs() == c.outputs());
}

TEST(Forward, RejectsBadInput) {
  const nn::Mlp m = identity_net(1.0);
  EXPECT_THROW(nn::forward(m, nn::Matrix::Ones(2, 2), false, 0), fairhgr::InvalidArgument);
  nn::Matrix bad = nn::Matrix::Ones(2, 1);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(nn::forward(m, bad, false, 0), fairhgr::Error);
}

TEST(Backward, LinearGradient) {
  const nn::Mlp m = identity_net(0.7);
  nn::Forward f = nn::forward(m, nn::Matrix::Constant(1, 1, 3.0), false, 0);
  const nn::MlpGradients g = nn::backward(m, f, nn::Matrix::Ones(1, 1));
  EXPECT_DOUBLE_EQ(g.weights[0](0, 0), 3.0);
  EXPECT_DOUBLE_EQ(g.biases[0](0), 1.0);
}

TEST(Backward, TapeIsSingleUse) {
  const nn::Mlp m = identity_net(1.0);
  nn::Forward f = nn::forward(m, nn::Matrix::Ones(2, 1), false, 0);
  (void)nn::backward(m, f, nn::Matrix::Ones(2, 1));
  EXPECT_THROW(nn::backward(m, f, nn::Matrix::Ones(2, 1)), fairhgr::Error);
}

TEST(Backward, StandardizeConstantBatchIsFinite) {
  nn::Tape t;
  const nn::Var x = t.leaf(nn::Matrix::Constant(4, 1, 5.0));
  const nn::Var z = t.standardize(x, 1e-8);
  const nn::Var loss = t.mean(t.mul(z, t.constant(nn::Matrix::Random(4, 1))));
  t.backward(loss);
  EXPECT_TRUE(t.grad(x).allFinite());
  EXPECT_EQ(t.value(z).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, StandardizeMatchesFiniteDifferences) {
  Rng rng(5);
  nn::Matrix x0(9, 1), w(9, 1);
  for (int i = 0; i < 9; ++i) {
    x0(i, 0) = rng.normal();
    w(i, 0) = rng.normal();
  }
  auto objective = [&](const nn::Matrix& x) {
    nn::Tape t;
    const nn::Var xv = t.leaf(x);
    return t.scalar(t.mean(t.mul(t.square(t.standardize(xv, 1e-8)), t.constant(w))));
  };
  nn::Tape t;
  const nn::Var xv = t.leaf(x0);
  t.backward(t.mean(t.mul(t.square(t.standardize(xv, 1e-8)), t.constant(w))));
  const nn::Matrix analytic = t.grad(xv);
  for (int i = 0; i < 9; ++i) {
    nn::Matrix hi = x0, lo = x0;
    hi(i, 0) += 1e-5;
    lo(i, 0) -= 1e-5;
    const double numeric = (objective(hi) - objective(lo)) / 2e-5;
    EXPECT_NEAR(analytic(i, 0), numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
  }
}

TEST(Backward, RandomNetsMatchFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const fairhgr::testing::GradientCheck r = fairhgr::testing::check_random_net(rng);
    EXPECT_LT(r.max_relative_error, 1e-4) << "trial " << trial;
  }
}

TEST(Optimizer, SgdDescendAndAscend) {
  nn::OptimizerConfig cfg{nn::OptimizerKind::sgd, 0.1};
  nn::Mlp m = identity_net(1.0);
  nn::MlpGradients g;
  g.weights = {nn::Matrix::Constant(1, 1, 2.0)};
  g.biases = {nn::Vector::Zero(1)};
  nn::Optimizer down(cfg, m);
  down.step(m, g, nn::Direction::descend);
  EXPECT_NEAR(m.weights()[0](0, 0), 0.8, 1e-15);
  EXPECT_EQ(down.steps(), 1u);
  nn::Mlp m2 = identity_net(1.0);
  nn::Optimizer up(cfg, m2);
  up.step(m2, g, nn::Direction::ascend);
  EXPECT_NEAR(m2.weights()[0](0, 0), 1.2, 1e-15);
}

TEST(Optimizer, AdamZeroGradientIsFixedPoint) {
  nn::Mlp m(nn::dense_stack(2, 1, 4), 3);
  const nn::Mlp before = m;
  nn::Optimizer opt(nn::OptimizerConfig{}, m);
  nn::MlpGradients g;
  for (const auto& w : m.weights()) g.weights.push_back(nn::Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : m.biases()) g.biases.push_back(nn::Vector::Zero(b.size()));
  for (int i = 0; i < 5; ++i) opt.step(m, g, nn::Direction::descend);
  EXPECT_TRUE(m == before);
}

TEST(Optimizer, AdamFirstStepIsLearningRateTimesSign) {
  nn::Mlp m = identity_net(1.0);
  nn::Optimizer opt(nn::OptimizerConfig{nn::OptimizerKind::adam, 0.01}, m);
  nn::MlpGradients g;
  g.weights = {nn::Matrix::Constant(1, 1, -3.0)};
  g.biases = {nn::Vector::Zero(1)};
  opt.step(m, g, nn::Direction::descend);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(m.weights()[0](0, 0), 1.0 + 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
}

TEST(Optimizer, RejectsShapeMismatch) {
  nn::Mlp m = identity_net(1.0);
  nn::Optimizer opt(nn::OptimizerConfig{}, m);
  nn::MlpGradients g;
  g.weights = {nn::Matrix::Zero(2, 1)};
  g.biases = {nn::Vector::Zero(1)};
  EXPECT_THROW(opt.step(m, g, nn::Direction::descend), fairhgr::InvalidArgument);
}

TEST(StandardizeBatch, ThreeValues) {
  const std::vector<double> x = {1, 2, 3};
  const nn::Standardized s = nn::standardize_batch(x, 0.0);
  EXPECT_NEAR(s.values[0], -std::sqrt(1.5), 1e-15);
  EXPECT_NEAR(s.values[1], 0.0, 1e-15);
  EXPECT_NEAR(s.values[2], std::sqrt(1.5), 1e-15);
  EXPECT_NEAR(s.variance, 2.0 / 3.0, 1e-15);
}

TEST(StandardizeBatch, ConstantBatchGivesZeros) {
  const std::vector<double> x = {5, 5, 5};
  const nn::Standardized s = nn::standardize_batch(x, 1e-8);
  for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(StandardizeBatch, NeedsTwoValues) {
  const std::vector<double> x = {1};
  EXPECT_THROW(nn::standardize_batch(x, 1e-8), fairhgr::InvalidArgument);
}

TEST(StandardizeBatch, CenteredAndUnitVarianceProperty) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 2 + rng.index(60);
    const double scale = std::exp(rng.uniform(-3.0, 5.0));
    std::vector<double> x(b);
    for (double& v : x) v = rng.normal(rng.uniform(-100, 100), scale);
    const nn::Standardized s = nn::standardize_batch(x, 1e-8);
    double m = 0.0, q = 0.0;
    for (double v : s.values) m += v;
    m /= static_cast<double>(b);
    for (double v : s.values) q += (v - m) * (v - m);
    q /= static_cast<double>(b);
    EXPECT_LT(std::abs(m), 1e-9);
    if (s.variance >= 1e-6) {
      EXPECT_GE(q, 0.999);
      EXPECT_LE(q, 1.001);
    }
  }
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a(42, 1), b(42, 1), c(42, 2);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(9);
  const int n = 200000;
  double s = 0.0, q = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    q += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(q / n, 1.0, 0.01);
}

TEST(Rng, PermutationIsAPermutation) {
  Rng rng(3);
  std::vector<std::size_t> p = rng.permutation(100);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}
