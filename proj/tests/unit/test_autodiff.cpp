// SPDX-License-Identifier: Apache-2.0
#include "grad_check.hpp"

#include "lenctl/autodiff/optimizer.hpp"
#include "lenctl/error.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lenctl;
using lenctl::testing::gradient_error;
using lenctl::testing::probe;

namespace {

constexpr int kSeeds = 20;
constexpr double kTolerance = 1e-4;

ad::Tensor param(Eigen::Index r, Eigen::Index c, ad::Rng& rng, double std = 1.0) {
  return ad::Tensor::parameter(ad::random_normal(r, c, std, rng));
}

ad::Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  ad::Matrix m(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST(Matmul, IdentityAndProjector) {
  const auto c = ad::matmul(ad::Tensor::constant(ad::Matrix::Identity(2, 2)),
                            ad::Tensor::constant(mat({{1, 2}, {3, 4}})));
  EXPECT_EQ(c.value(), mat({{1, 2}, {3, 4}}));
  const auto p = ad::matmul(ad::Tensor::constant(mat({{1, 0}, {0, 0}})),
                            ad::Tensor::constant(mat({{5}, {7}})));
  EXPECT_EQ(p.value(), mat({{5}, {0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  ad::Rng rng(11);
  const ad::Matrix a = ad::random_normal(3, 4, 1.0, rng);
  const ad::Matrix b = ad::random_normal(4, 2, 1.0, rng);
  const ad::Matrix c = ad::matmul(ad::Tensor::constant(a), ad::Tensor::constant(b)).value();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(ad::matmul(ad::Tensor::constant(ad::Matrix::Zero(2, 3)),
                          ad::Tensor::constant(ad::Matrix::Zero(2, 3))),
               DimensionError);
}

TEST(Activation, Values) {
  const ad::Tensor x = ad::Tensor::constant(mat({{-1, 0, 2}}));
  EXPECT_EQ(ad::relu(x).value(), mat({{0, 0, 2}}));
  EXPECT_EQ(ad::tanh(ad::Tensor::constant(mat({{0}}))).value()(0, 0), 0.0);
  EXPECT_THROW(ad::parse_activation("swish"), ConfigError);
}

TEST(Activation, GeluSumMatchesFiniteDifference) {
  ad::Rng rng(3);
  ad::Tensor x = param(1, 9, rng);
  EXPECT_LT(gradient_error([&] { return ad::sum(ad::gelu(x)); }, {x}), 1e-5);
}

TEST(LayerNorm, ConstantAndNormalizedRows) {
  const ad::Tensor gain = ad::Tensor::constant(ad::Matrix::Ones(1, 4));
  const ad::Tensor bias = ad::Tensor::constant(ad::Matrix::Zero(1, 4));
  const auto y = ad::layer_norm(ad::Tensor::constant(mat({{5, 5, 5, 5}})), gain, bias);
  EXPECT_LT(y.value().cwiseAbs().maxCoeff(), 1e-12);
  const auto z = ad::layer_norm(ad::Tensor::constant(mat({{1, -1}})),
                                ad::Tensor::constant(ad::Matrix::Ones(1, 2)),
                                ad::Tensor::constant(ad::Matrix::Zero(1, 2)));
  EXPECT_NEAR(z.value()(0, 0), 1.0, 1e-5);
  EXPECT_NEAR(z.value()(0, 1), -1.0, 1e-5);
}

TEST(LayerNorm, ZeroWidthThrows) {
  EXPECT_THROW(ad::layer_norm(ad::Tensor::constant(ad::Matrix::Zero(2, 0)),
                              ad::Tensor::constant(ad::Matrix::Zero(1, 0)),
                              ad::Tensor::constant(ad::Matrix::Zero(1, 0))),
               DimensionError);
}

TEST(LayerNorm, GradientOn2x8) {
  ad::Rng rng(5);
  ad::Tensor x = param(2, 8, rng), g = param(1, 8, rng), b = param(1, 8, rng);
  const ad::Matrix r = ad::random_normal(2, 8, 1.0, rng);
  EXPECT_LT(gradient_error([&] { return probe(ad::layer_norm(x, g, b), r); }, {x, g, b}), 1e-5);
}

TEST(CrossEntropy, Values) {
  const int zero = 0;
  EXPECT_NEAR(ad::softmax_cross_entropy(ad::Tensor::constant(mat({{0, 0}})), {&zero, 1}).item(),
              std::log(2.0), 1e-12);
  EXPECT_NEAR(ad::softmax_cross_entropy(ad::Tensor::constant(mat({{1000, 0}})), {&zero, 1}).item(),
              0.0, 1e-12);
  const auto extreme = ad::softmax_cross_entropy(ad::Tensor::constant(mat({{1e6, -1e6, 0}})), {&zero, 1});
  EXPECT_TRUE(std::isfinite(extreme.item()));
  const int one = 1;
  EXPECT_NEAR(ad::softmax_cross_entropy(ad::Tensor::constant(mat({{1e6, -1e6, 0}})), {&one, 1}).item(),
              2e6, 1e-6);
}

TEST(CrossEntropy, BadTargetThrows) {
  const int bad = 2;
  EXPECT_THROW(ad::softmax_cross_entropy(ad::Tensor::constant(mat({{0, 0}})), {&bad, 1}), IndexError);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  ad::Rng rng(8);
  ad::Tensor logits = param(4, 7, rng);
  const std::vector<int> targets = {0, 6, 3, 3};
  EXPECT_LT(gradient_error([&] { return ad::softmax_cross_entropy(logits, targets); }, {logits}), 1e-5);
  logits.zero_grad();
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::softmax_cross_entropy(logits, targets));
  }
  for (int i = 0; i < 4; ++i) {
    const Eigen::RowVectorXd e = (logits.value().row(i).array() - logits.value().row(i).maxCoeff()).exp();
    Eigen::RowVectorXd expected = e / e.sum();
    expected(targets[static_cast<std::size_t>(i)]) -= 1.0;
    EXPECT_LT((logits.grad().row(i) - expected / 4.0).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Backward, SumAndQuadratic) {
  ad::Tensor x = ad::Tensor::parameter(mat({{1, -2, 3}}));
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(x));
  }
  EXPECT_EQ(x.grad(), ad::Matrix::Ones(1, 3));
  ad::Tensor y = ad::Tensor::parameter(mat({{3}}));
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(ad::mul(y, y)));
  }
  EXPECT_DOUBLE_EQ(y.grad()(0, 0), 6.0);
}

TEST(Backward, TensorUsedTwiceAccumulatesBothPaths) {
  // f = sum(tanh(x) * x): df/dx = (1 - tanh^2 x) x + tanh x.
  ad::Tensor x = ad::Tensor::parameter(mat({{0.3, -1.2, 2.0}}));
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(ad::mul(ad::tanh(x), x)));
  }
  for (int i = 0; i < 3; ++i) {
    const double v = x.value()(0, i), t = std::tanh(v);
    EXPECT_NEAR(x.grad()(0, i), (1 - t * t) * v + t, 1e-14);
  }
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
  ad::Tensor x = ad::Tensor::parameter(mat({{1, 2}}));
  for (int i = 0; i < 2; ++i) {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(x));
  }
  EXPECT_EQ(x.grad(), ad::Matrix::Constant(1, 2, 2.0));
}

TEST(Backward, NonScalarLossThrows) {
  ad::Tensor x = ad::Tensor::parameter(mat({{1, 2}}));
  ad::Tape tape;
  ad::TapeScope scope(tape);
  EXPECT_THROW(tape.backward(ad::scale(x, 2.0)), ContractError);
}

TEST(Backward, NoTapeRecordsNothing) {
  ad::Tensor x = ad::Tensor::parameter(mat({{1, 2}}));
  const ad::Tensor y = ad::sum(x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, NonFiniteIsAnError) {
  EXPECT_THROW(ad::Tensor::constant(mat({{std::nan("")}})), NumericError);
  EXPECT_THROW(ad::scale(ad::Tensor::constant(mat({{1e308}})), 10.0), NumericError);
}

/// Every primitive against central differences over kSeeds seeds.
TEST(GradientSuite, EveryPrimitive) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    ad::Rng rng(static_cast<std::uint64_t>(1000 + seed));
    SCOPED_TRACE("seed " + std::to_string(seed));
    ad::Tensor a = param(3, 4, rng), b = param(4, 5, rng), c = param(3, 4, rng);
    ad::Tensor row = param(1, 4, rng);
    const ad::Matrix r34 = ad::random_normal(3, 4, 1.0, rng);
    const ad::Matrix r35 = ad::random_normal(3, 5, 1.0, rng);
    EXPECT_LT(gradient_error([&] { return probe(ad::matmul(a, b), r35); }, {a, b}), kTolerance);
    EXPECT_LT(gradient_error([&] { return probe(ad::add(a, c), r34); }, {a, c}), kTolerance);
    EXPECT_LT(gradient_error([&] { return probe(ad::mul(a, c), r34); }, {a, c}), kTolerance);
    EXPECT_LT(gradient_error([&] { return probe(ad::scale(a, -1.7), r34); }, {a}), kTolerance);
    EXPECT_LT(gradient_error([&] { return probe(ad::add_row(a, row), r34); }, {a, row}), kTolerance);
    EXPECT_LT(gradient_error([&] { return ad::sum(a); }, {a}), kTolerance);
    // Keep relu inputs away from the kink so the difference quotient is valid.
    ad::Tensor shifted = ad::Tensor::parameter(
        a.value().unaryExpr([](double v) { return std::abs(v) < 0.05 ? v + 0.1 : v; }));
    for (auto kind : {ad::Activation::identity, ad::Activation::relu, ad::Activation::gelu,
                      ad::Activation::tanh}) {
      EXPECT_LT(gradient_error([&] { return probe(ad::activation(shifted, kind), r34); }, {shifted}),
                kTolerance)
          << ad::to_string(kind);
    }
    ad::Tensor gain = param(1, 4, rng), bias = param(1, 4, rng);
    EXPECT_LT(gradient_error([&] { return probe(ad::layer_norm(a, gain, bias), r34); }, {a, gain, bias}),
              kTolerance);
    const std::vector<int> targets = {1, 0, 3};
    EXPECT_LT(gradient_error([&] { return ad::softmax_cross_entropy(a, targets); }, {a}), kTolerance);
    ad::Tensor table = param(6, 4, rng);
    const std::vector<int> ids = {5, 0, 5};
    EXPECT_LT(gradient_error([&] { return probe(ad::gather_rows(table, ids), r34); }, {table}), kTolerance);

    // Two packed causal sequences (3 and 2 rows) and a cross-attention over
    // one memory row per sequence.
    ad::Tensor q = param(5, 4, rng), k = param(5, 4, rng), v = param(5, 4, rng);
    const ad::Matrix r54 = ad::random_normal(5, 4, 1.0, rng);
    const std::vector<ad::AttentionBlock> self = {{0, 3, 0, 3}, {3, 2, 3, 2}};
    EXPECT_LT(gradient_error([&] { return probe(ad::attention(q, k, v, 2, self, true), r54); }, {q, k, v}),
              kTolerance);
    ad::Tensor mk = param(2, 4, rng), mv = param(2, 4, rng);
    const std::vector<ad::AttentionBlock> cross = {{0, 3, 0, 1}, {3, 2, 1, 1}};
    EXPECT_LT(gradient_error([&] { return probe(ad::attention(q, mk, mv, 2, cross, false), r54); },
                             {q, mk, mv}),
              kTolerance);
    const std::vector<ad::AttentionBlock> wide = {{0, 5, 0, 5}};
    EXPECT_LT(gradient_error([&] { return probe(ad::attention(q, k, v, 1, wide, false), r54); }, {q, k, v}),
              kTolerance);
  }
}

TEST(GradientSuite, CompositeGraph) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    ad::Rng rng(static_cast<std::uint64_t>(2000 + seed));
    ad::Tensor x = param(4, 6, rng), w1 = param(6, 8, rng, 0.5), b1 = param(1, 8, rng),
               w2 = param(8, 5, rng, 0.5);
    const std::vector<int> targets = {4, 0, 2, 1};
    const auto loss = [&] {
      return ad::softmax_cross_entropy(ad::matmul(ad::gelu(ad::add_row(ad::matmul(x, w1), b1)), w2),
                                       targets);
    };
    EXPECT_LT(gradient_error(loss, {x, w1, b1, w2}), kTolerance) << "seed " << seed;
  }
}

TEST(Attention, CausalMaskHidesLaterKeys) {
  ad::Rng rng(4);
  ad::Matrix q = ad::random_normal(4, 4, 1.0, rng), k = ad::random_normal(4, 4, 1.0, rng),
             v = ad::random_normal(4, 4, 1.0, rng);
  const std::vector<ad::AttentionBlock> block = {{0, 4, 0, 4}};
  const ad::Matrix before =
      ad::attention(ad::Tensor::constant(q), ad::Tensor::constant(k), ad::Tensor::constant(v), 2, block, true)
          .value();
  k.row(3).setConstant(9.0);
  v.row(3).setConstant(-9.0);
  const ad::Matrix after =
      ad::attention(ad::Tensor::constant(q), ad::Tensor::constant(k), ad::Tensor::constant(v), 2, block, true)
          .value();
  EXPECT_EQ(before.topRows(3), after.topRows(3));
  EXPECT_NE(before.row(3), after.row(3));
}

TEST(AdamW, ZeroGradientNoDecayIsIdentity) {
  ad::Tensor p = ad::Tensor::parameter(mat({{0.5, -2.0}}));
  p.node()->grad = ad::Matrix::Zero(1, 2);
  ad::OptimizerState s;
  s.learning_rate = 0.1;
  s.weight_decay = 0.0;
  std::vector<ad::Tensor> ps = {p};
  ad::adamw_step(ps, s);
  EXPECT_EQ(p.value(), mat({{0.5, -2.0}}));
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  ad::Tensor p = ad::Tensor::parameter(mat({{1.0}}));
  p.node()->grad = mat({{1.0}});
  ad::OptimizerState s;
  s.learning_rate = 0.1;
  s.weight_decay = 0.0;
  std::vector<ad::Tensor> ps = {p};
  ad::adamw_step(ps, s);
  // m_hat = 1, v_hat = 1: p = 1 - 0.1 * 1 / (1 + 1e-8).
  EXPECT_NEAR(p.value()(0, 0), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.grad()(0, 0), 1.0);
}

TEST(AdamW, PureDecayIsDecoupled) {
  ad::Tensor p = ad::Tensor::parameter(mat({{2.0, -4.0}}));
  p.node()->grad = ad::Matrix::Zero(1, 2);
  ad::OptimizerState s;
  s.learning_rate = 0.1;
  s.weight_decay = 0.5;
  std::vector<ad::Tensor> ps = {p};
  ad::adamw_step(ps, s);
  EXPECT_NEAR(p.value()(0, 0), 2.0 * 0.95, 1e-15);
  EXPECT_NEAR(p.value()(0, 1), -4.0 * 0.95, 1e-15);
  double previous = p.value().norm();
  for (int i = 0; i < 5; ++i) {
    ad::adamw_step(ps, s);
    EXPECT_LT(p.value().norm(), previous);
    previous = p.value().norm();
  }
}

TEST(AdamW, MissingGradientThrows) {
  std::vector<ad::Tensor> ps = {ad::Tensor::parameter(mat({{1.0}}))};
  ad::OptimizerState s;
  EXPECT_THROW(ad::adamw_step(ps, s), ContractError);
}

TEST(ClipGradNorm, ScalesToMaxNorm) {
  ad::Tensor a = ad::Tensor::parameter(mat({{3.0}})), b = ad::Tensor::parameter(mat({{4.0}}));
  a.node()->grad = mat({{3.0}});
  b.node()->grad = mat({{4.0}});
  std::vector<ad::Tensor> ps = {a, b};
  EXPECT_DOUBLE_EQ(ad::clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(a.grad()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(b.grad()(0, 0), 0.8, 1e-15);
}
