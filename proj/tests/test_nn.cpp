#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>

#include "dialtraffic/nn/adam.hpp"
#include "dialtraffic/nn/checkpoint.hpp"
#include "dialtraffic/nn/graph.hpp"
#include "dialtraffic/nn/loss.hpp"
#include "dialtraffic/nn/mlp.hpp"
#include "oracles.hpp"

using namespace dialtraffic;
using nn::Matrix;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

oracle::Grid to_grid(const Matrix& m) {
  oracle::Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return g;
}

std::vector<oracle::Layer> to_oracle(const nn::NetworkParams& p) {
  std::vector<oracle::Layer> out;
  for (const auto& l : p.layers) {
    auto b = to_grid(l.bias.value);
    out.push_back({to_grid(l.weight.value), b[0]});
  }
  return out;
}

/// Random network with random biases so no gradient is trivially zero.
nn::NetworkParams random_net(Rng& rng, std::vector<std::size_t> widths) {
  auto p = nn::NetworkParams::uniform(widths, rng);
  for (auto& l : p.layers) l.bias.value = random_matrix(rng, 1, l.out_width(), 0.5);
  return p;
}

}  // namespace

TEST(LinearForward, IdentitySliceReturnsLeadingEntries) {
  nn::DenseLayer layer(26, 5);
  for (int i = 0; i < 5; ++i) layer.weight.value(i, i) = 1.0;
  Rng rng(3);
  Matrix x = random_matrix(rng, 1, 26);
  Matrix y = nn::linear_forward(x, layer);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(y(0, i), x(0, i));
}

TEST(LinearForward, ZeroMapGivesZero) {
  nn::DenseLayer layer(4, 3);
  Rng rng(4);
  EXPECT_TRUE(nn::linear_forward(random_matrix(rng, 2, 4), layer).isZero(0.0));
}

TEST(LinearForward, MatchesTripleLoopOracle) {
  Rng rng(5);
  nn::DenseLayer layer(4, 3);
  layer.weight.value = random_matrix(rng, 3, 4);
  layer.bias.value = random_matrix(rng, 1, 3);
  Matrix x = random_matrix(rng, 1, 4);
  const auto expect = oracle::matmul_affine(to_grid(x), to_grid(layer.weight.value), to_grid(layer.bias.value)[0]);
  const Matrix y = nn::linear_forward(x, layer);
  for (int o = 0; o < 3; ++o) EXPECT_NEAR(y(0, o), expect[0][static_cast<std::size_t>(o)], 1e-12);
}

TEST(LinearForward, ShapeMismatchNamesBothShapes) {
  nn::DenseLayer layer(4, 3);
  try {
    nn::linear_forward(Matrix::Zero(1, 5), layer);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1 x 5]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3 x 4]"), std::string::npos) << msg;
  }
}

TEST(MlpForward, ZeroNetworkOutputsZero) {
  const std::array<std::size_t, 4> widths{31, 256, 256, 2};
  auto p = nn::NetworkParams::zeros(widths);
  Rng rng(6);
  const Matrix y = nn::mlp_forward(random_matrix(rng, 1, 31), p);
  EXPECT_EQ(y.cols(), 2);
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_EQ(y(0, 1), 0.0);
}

TEST(MlpForward, ReluClampsNegativeHidden) {
  const std::array<std::size_t, 4> widths{1, 1, 1, 1};
  auto p = nn::NetworkParams::zeros(widths);
  for (auto& l : p.layers) l.weight.value(0, 0) = 1.0;
  Matrix x(1, 1);
  x(0, 0) = -3.0;
  EXPECT_EQ(nn::mlp_forward(x, p)(0, 0), 0.0);
}

TEST(MlpForward, MatchesLayerwiseOracleAtFullSize) {
  Rng rng(7);
  auto p = random_net(rng, {31, 256, 256, 2});
  Matrix x = random_matrix(rng, 1, 31);
  const auto expect = oracle::mlp(to_grid(x), to_oracle(p));
  const Matrix y = nn::mlp_forward(x, p);
  EXPECT_NEAR(y(0, 0), expect[0][0], 1e-10);
  EXPECT_NEAR(y(0, 1), expect[0][1], 1e-10);

  nn::Graph g;
  const nn::Var out = nn::mlp_forward(g, g.constant(x), p);
  EXPECT_NEAR(g.value(out)(0, 0), expect[0][0], 1e-10);
  EXPECT_NEAR(g.value(out)(0, 1), expect[0][1], 1e-10);
}

TEST(NetworkParams, ValidateRejectsBrokenChain) {
  const std::array<std::size_t, 3> widths{3, 4, 2};
  auto p = nn::NetworkParams::zeros(widths);
  EXPECT_NO_THROW(p.validate());
  p.layers[1] = nn::DenseLayer(5, 2);
  EXPECT_THROW(p.validate(), DimensionError);
}

TEST(NetworkParams, UniformInitWithinFanInBound) {
  Rng rng(8);
  const std::array<std::size_t, 3> widths{16, 8, 2};
  auto p = nn::NetworkParams::uniform(widths, rng);
  EXPECT_LE(p.layers[0].weight.value.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_LE(p.layers[1].weight.value.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(8.0));
  EXPECT_TRUE(p.layers[0].bias.value.isZero(0.0));
}

TEST(Backward, SquareAtThreeGivesSix) {
  nn::Graph g;
  Matrix x(1, 1);
  x(0, 0) = 3.0;
  const nn::Var v = g.leaf(x);
  g.backward(g.sum(g.mul(v, v)));
  EXPECT_EQ(g.grad(v)(0, 0), 6.0);
}

TEST(Backward, SecondCallIsUsageError) {
  nn::Graph g;
  const nn::Var v = g.leaf(Matrix::Ones(1, 1));
  const nn::Var loss = g.sum(g.square(v));
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), UsageError);
}

TEST(Backward, NonScalarLossRejected) {
  nn::Graph g;
  const nn::Var v = g.leaf(Matrix::Ones(2, 1));
  EXPECT_THROW(g.backward(v), UsageError);
}

TEST(Backward, DetachedMessageGetsExactlyZero) {
  Rng rng(9);
  auto p = random_net(rng, {7, 4, 2});
  nn::Graph g;
  const nn::Var obs = g.constant(random_matrix(rng, 3, 5));
  const nn::Var msg = g.leaf(random_matrix(rng, 3, 2));
  const nn::Var input = g.concat_cols(obs, g.detach(msg));
  g.backward(g.sum(nn::mlp_forward(g, input, p)));
  EXPECT_TRUE(g.grad(msg).isZero(0.0));
  ASSERT_TRUE(p.layers[0].weight.grad.has_value());
  EXPECT_FALSE(p.layers[0].weight.grad->isZero(0.0));
}

TEST(Backward, GatherRowsRoutesGradientToSourceRows) {
  nn::Graph g;
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  const nn::Var v = g.leaf(x);
  const nn::Var y = g.gather_rows(v, {-1, 0, 1, 1});
  EXPECT_TRUE(g.value(y).row(0).isZero(0.0));
  EXPECT_EQ(g.value(y)(3, 1), 4.0);
  g.backward(g.sum(y));
  Matrix expect(3, 2);
  expect << 1, 1, 2, 2, 0, 0;
  EXPECT_EQ(g.grad(v), expect);
}

TEST(Backward, RandomTwoLayerNetMatchesFiniteDifferences) {
  Rng rng(10);
  auto p = random_net(rng, {5, 6, 3});
  const Matrix x = random_matrix(rng, 4, 5);
  const Matrix target = random_matrix(rng, 4, 3);
  auto loss_value = [&] {
    nn::Graph g;
    const nn::Var y = nn::mlp_forward(g, g.constant(x), p);
    return g.value(g.mean(g.square(g.sub(y, g.constant(target)))))(0, 0);
  };
  nn::Graph g;
  const nn::Var y = nn::mlp_forward(g, g.constant(x), p);
  g.backward(g.mean(g.square(g.sub(y, g.constant(target)))));
  for (auto* t : p.parameters()) {
    ASSERT_TRUE(t->grad.has_value());
    const Matrix analytic = *t->grad;
    for (Eigen::Index i = 0; i < t->value.size(); ++i) {
      const double fd = oracle::central_difference(loss_value, t->value.data()[i]);
      EXPECT_TRUE(oracle::close_relative(analytic.data()[i], fd)) << analytic.data()[i] << " vs " << fd;
    }
  }
}

TEST(Backward, PropertyRandomSmallNetworks) {
  // Up to 3 layers, up to 8 units per layer.
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t depth = 1 + rng.below(3);
    std::vector<std::size_t> widths{1 + rng.below(8)};
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(1 + rng.below(8));
    auto p = random_net(rng, widths);
    const Matrix x = random_matrix(rng, 1 + static_cast<Eigen::Index>(rng.below(4)), static_cast<Eigen::Index>(widths[0]));
    auto f = [&] {
      nn::Graph g;
      return g.value(g.sum(g.square(nn::mlp_forward(g, g.constant(x), p))))(0, 0);
    };
    nn::Graph g;
    g.backward(g.sum(g.square(nn::mlp_forward(g, g.constant(x), p))));
    for (auto* t : p.parameters()) {
      const Matrix analytic = *t->grad;
      for (Eigen::Index i = 0; i < t->value.size(); ++i) {
        const double fd = oracle::central_difference(f, t->value.data()[i]);
        EXPECT_TRUE(oracle::close_relative(analytic.data()[i], fd)) << "trial " << trial;
      }
    }
  }
}

TEST(Backward, GraphCompletenessAlongRandomDirection) {
  // <grad, d> equals the directional derivative of a forward rerun.
  Rng rng(12);
  const Matrix a0 = random_matrix(rng, 3, 4);
  const Matrix b0 = random_matrix(rng, 3, 2);
  const Matrix da = random_matrix(rng, 3, 4);
  const Matrix db = random_matrix(rng, 3, 2);
  nn::DenseLayer layer(6, 2);
  layer.weight.value = random_matrix(rng, 2, 6);
  auto forward = [&](nn::Graph& g, const Matrix& a, const Matrix& b, nn::Var* va, nn::Var* vb) {
    *va = g.leaf(a);
    *vb = g.leaf(b);
    const nn::Var h = g.relu(nn::linear_forward(g, g.concat_cols(*va, *vb), layer));
    return g.sum(g.mul(h, h));
  };
  nn::Graph g;
  nn::Var va, vb;
  g.backward(forward(g, a0, b0, &va, &vb));
  const double predicted = (g.grad(va).cwiseProduct(da)).sum() + (g.grad(vb).cwiseProduct(db)).sum();
  const double h = 1e-5;
  nn::Graph gp, gm;
  nn::Var t1, t2;
  const double up = gp.value(forward(gp, a0 + h * da, b0 + h * db, &t1, &t2))(0, 0);
  const double down = gm.value(forward(gm, a0 - h * da, b0 - h * db, &t1, &t2))(0, 0);
  EXPECT_TRUE(oracle::close_relative(predicted, (up - down) / (2 * h), 1e-6));
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  Rng rng(13);
  auto p = random_net(rng, {3, 2});
  const auto before = p.layers[0].weight.value;
  for (auto* t : p.parameters()) t->grad = Matrix::Zero(t->value.rows(), t->value.cols());
  nn::adam_step(p, 0.0005);
  EXPECT_EQ(p.layers[0].weight.value, before);
  EXPECT_EQ(p.step, 1u);
  EXPECT_FALSE(p.layers[0].weight.grad.has_value());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  const std::array<std::size_t, 2> widths{1, 1};
  auto p = nn::NetworkParams::zeros(widths);
  p.layers[0].weight.grad = Matrix::Constant(1, 1, 0.2);
  p.layers[0].bias.grad = Matrix::Zero(1, 1);
  nn::adam_step(p, 0.0005);
  EXPECT_NEAR(p.layers[0].weight.value(0, 0), -0.0005 * 0.2 / (0.2 + 1e-8), 1e-15);
  EXPECT_NEAR(p.layers[0].weight.value(0, 0), -0.0005, 1e-10);
}

TEST(Adam, MissingGradientIsUsageError) {
  const std::array<std::size_t, 2> widths{2, 2};
  auto p = nn::NetworkParams::zeros(widths);
  p.layers[0].weight.grad = Matrix::Zero(2, 2);
  EXPECT_THROW(nn::adam_step(p, 0.001), UsageError);
}

TEST(Adam, HundredStepsMatchReferenceOracle) {
  Rng rng(14);
  const std::array<std::size_t, 2> widths{3, 2};
  auto p = nn::NetworkParams::zeros(widths);
  p.layers[0].weight.value = random_matrix(rng, 2, 3);
  std::vector<double> ref(p.layers[0].weight.value.data(), p.layers[0].weight.value.data() + 6);
  oracle::Adam oracle_adam;
  oracle_adam.lr = 0.0005;
  for (int s = 0; s < 100; ++s) {
    const Matrix g = random_matrix(rng, 2, 3);
    p.layers[0].weight.grad = g;
    p.layers[0].bias.grad = Matrix::Zero(1, 2);
    nn::adam_step(p, 0.0005);
    oracle_adam.step(ref, std::vector<double>(g.data(), g.data() + 6));
  }
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(p.layers[0].weight.value.data()[i], ref[static_cast<std::size_t>(i)], 1e-9);
  EXPECT_EQ(p.step, 100u);
}

TEST(Adam, DeterministicBitIdenticalUpdates) {
  Rng r1(15), r2(15);
  auto a = random_net(r1, {4, 3, 2});
  auto b = random_net(r2, {4, 3, 2});
  for (int s = 0; s < 5; ++s) {
    for (auto* t : a.parameters()) t->grad = random_matrix(r1, t->value.rows(), t->value.cols());
    for (auto* t : b.parameters()) t->grad = random_matrix(r2, t->value.rows(), t->value.cols());
    nn::adam_step(a, 0.01);
    nn::adam_step(b, 0.01);
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_EQ(a.layers[l].weight.value, b.layers[l].weight.value);
    EXPECT_EQ(a.layers[l].bias_v, b.layers[l].bias_v);
  }
}

TEST(TdLoss, ZeroWhenQEqualsTarget) {
  nn::Graph g;
  Matrix q(3, 1);
  q << -1, -2, -3;
  EXPECT_EQ(g.value(nn::td_loss(g, g.leaf(q), q))(0, 0), 0.0);
}

TEST(TdLoss, SingleStepArithmetic) {
  nn::Graph g;
  EXPECT_EQ(g.value(nn::td_loss(g, g.leaf(Matrix::Constant(1, 1, -100.0)), Matrix::Constant(1, 1, -104.0)))(0, 0),
            16.0);
}

TEST(TdLoss, GradientIsTwiceErrorOverN) {
  Rng rng(16);
  Matrix q = random_matrix(rng, 5, 1, 10.0);
  const Matrix target = random_matrix(rng, 5, 1, 10.0);
  nn::Graph g;
  const nn::Var v = g.leaf(q);
  g.backward(nn::td_loss(g, v, target));
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(g.grad(v)(i, 0), 2.0 * (q(i, 0) - target(i, 0)) / 5.0, 1e-12);
    auto f = [&] {
      nn::Graph h;
      return h.value(nn::td_loss(h, h.constant(q), target))(0, 0);
    };
    EXPECT_TRUE(oracle::close_relative(g.grad(v)(i, 0), oracle::central_difference(f, q(i, 0))));
  }
}

TEST(TdLoss, EmptySequenceIsUsageError) {
  nn::Graph g;
  EXPECT_THROW(nn::td_loss(g, g.leaf(Matrix(0, 1)), Matrix(0, 1)), UsageError);
}

TEST(Checkpoint, RoundTripIsValueExact) {
  Rng rng(17);
  auto p = random_net(rng, {31, 16, 16, 2});
  for (auto* t : p.parameters()) t->grad = random_matrix(rng, t->value.rows(), t->value.cols());
  nn::adam_step(p, 0.01);
  const auto path = std::filesystem::temp_directory_path() / "dialtraffic_ckpt_test.json";
  nn::save_checkpoint(p, path);
  const auto q = nn::load_checkpoint(path);
  ASSERT_EQ(q.layers.size(), p.layers.size());
  EXPECT_EQ(q.step, p.step);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    EXPECT_EQ(q.layers[l].weight.value, p.layers[l].weight.value);
    EXPECT_EQ(q.layers[l].bias.value, p.layers[l].bias.value);
    EXPECT_EQ(q.layers[l].weight_m, p.layers[l].weight_m);
    EXPECT_EQ(q.layers[l].weight_v, p.layers[l].weight_v);
    EXPECT_EQ(q.layers[l].bias_m, p.layers[l].bias_m);
    EXPECT_EQ(q.layers[l].bias_v, p.layers[l].bias_v);
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsUnknownVersionAndBadSizes) {
  const std::array<std::size_t, 2> widths{2, 2};
  auto j = nn::to_checkpoint(nn::NetworkParams::zeros(widths));
  auto bad_version = j;
  bad_version["version"] = 99;
  EXPECT_THROW(nn::from_checkpoint(bad_version), UsageError);
  auto bad_size = j;
  bad_size["weights"][0] = {1.0, 2.0, 3.0};
  EXPECT_THROW(nn::from_checkpoint(bad_size), DimensionError);
  EXPECT_THROW(nn::load_checkpoint("/nonexistent/ckpt.json"), IoError);
}
