#include <gtest/gtest.h>

#include "p2p/autodiff.hpp"
#include "test_util.hpp"

using namespace p2p;
using namespace p2p::ad;
using p2p::testing::check_gradients;
using p2p::testing::random_matrix;

namespace {

Var param(int r, int c, std::mt19937_64& rng) { return Var(random_matrix(r, c, rng), true); }

}  // namespace

TEST(Autodiff, ElementwiseAndMatmulGradients) {
  std::mt19937_64 rng(20);
  Var a = param(3, 4, rng), b = param(4, 2, rng), c = param(3, 2, rng), bias = param(1, 2, rng);
  const Matrix w = random_matrix(3, 2, rng);
  auto loss = [&] {
    Var y = add(matmul(a, b), mul(c, c));
    y = sub(linear(a, b, bias), scale(y, 0.3));
    y = gelu(add_constant(y, w));
    return sum(mul(y, y));
  };
  const auto r = check_gradients({a, b, c, bias}, loss, 0, rng);
  EXPECT_EQ(r.checked, 12 + 8 + 6 + 2);
  EXPECT_LT(r.worst, 1e-6);
}

TEST(Autodiff, ConcatSliceGatherGradients) {
  std::mt19937_64 rng(21);
  Var a = param(4, 3, rng), b = param(4, 2, rng), c = param(2, 5, rng);
  auto loss = [&] {
    Var x = concat_cols({a, b});
    x = concat_rows({x, c});
    x = slice_cols(x, 1, 3);
    x = slice_rows(x, 1, 4);
    x = gather_rows(x, {3, 0, 0, 2, 1, 3});
    return sum(mul(gelu(x), x));
  };
  EXPECT_LT(check_gradients({a, b, c}, loss, 0, rng).worst, 1e-6);
}

TEST(Autodiff, SegmentReductions) {
  std::mt19937_64 rng(22);
  Var a = param(7, 3, rng);
  const std::vector<int> offsets{0, 2, 5, 7};
  const Matrix mx = segment_max(a, offsets).value();
  const Matrix mean = segment_mean(a, offsets).value();
  for (int s = 0; s < 3; ++s) {
    const auto block = a.value().middleRows(offsets[s], offsets[s + 1] - offsets[s]);
    EXPECT_EQ(mx.row(s), block.colwise().maxCoeff());
    EXPECT_LT((mean.row(s) - block.colwise().mean()).norm(), 1e-15);
  }
  auto loss = [&] { return sum(mul(segment_max(a, offsets), segment_mean(a, offsets))); };
  EXPECT_LT(check_gradients({a}, loss, 0, rng).worst, 1e-6);
}

TEST(Autodiff, SparseLeftMultiply) {
  std::mt19937_64 rng(23);
  auto S = std::make_shared<SparseOp>(3, 4);
  S->insert(0, 1) = 2.0;
  S->insert(1, 0) = -1.0;
  S->insert(1, 3) = 0.5;
  S->insert(2, 2) = 1.5;
  S->makeCompressed();
  Var a = param(4, 2, rng);
  EXPECT_LT((sparse_left_mul(S, a).value() - Matrix(*S) * a.value()).norm(), 1e-15);
  auto loss = [&] { return sum(gelu(sparse_left_mul(S, a))); };
  EXPECT_LT(check_gradients({a}, loss, 0, rng).worst, 1e-6);
}

TEST(SmoothL1, Values) {
  EXPECT_EQ(smooth_l1_value(0.0, 0.01), 0.0);
  EXPECT_NEAR(smooth_l1_value(0.01, 0.01), 0.005, 1e-15);
  EXPECT_NEAR(smooth_l1_value(0.1, 0.01), 0.095, 1e-15);
  EXPECT_NEAR(smooth_l1_value(0.005, 0.01), 50 * 0.005 * 0.005, 1e-15);
}

TEST(SmoothL1, ContinuousWithContinuousSlopeAtThreshold) {
  const double tau = 0.01;
  const double eps = 1e-13;
  EXPECT_NEAR(smooth_l1_value(tau - eps, tau), smooth_l1_value(tau + eps, tau), 1e-12);
  EXPECT_NEAR(smooth_l1_derivative(tau - eps, tau), smooth_l1_derivative(tau + eps, tau), 1e-10);
  EXPECT_NEAR(50 * tau * tau, tau - 0.005, 1e-15);
  EXPECT_NEAR(100 * tau, 1.0, 1e-15);
}

TEST(SmoothL1, SumsOverEntriesAndDifferentiates) {
  std::mt19937_64 rng(24);
  Var p = Var(random_matrix(4, 3, rng, 0.02), true);
  const Matrix t = random_matrix(4, 3, rng, 0.02);
  double expected = 0;
  for (Eigen::Index k = 0; k < t.size(); ++k) expected += smooth_l1_value(std::abs(p.value().data()[k] - t.data()[k]), 0.01);
  EXPECT_NEAR(smooth_l1(p, t, 0.01).scalar(), expected, 1e-15);
  EXPECT_LT(check_gradients({p}, [&] { return smooth_l1(p, t, 0.01); }, 0, rng, 1e-8).worst, 1e-5);
  EXPECT_GE(smooth_l1(p, t, 0.01).scalar(), 0.0);
}

TEST(Attention, RowsAreStochastic) {
  std::mt19937_64 rng(25);
  Var q = param(5, 4, rng), k = param(6, 4, rng), v = param(6, 4, rng);
  std::vector<AttentionGroup> groups{{{0, 1, 2}, {0, 1, 2, 3}}, {{3, 4}, {4, 5}}};
  AttentionProbe probe;
  attention(q, k, v, groups, 2, &probe);
  ASSERT_EQ(probe.weights.size(), 4u);
  for (const auto& w : probe.weights) {
    EXPECT_LT((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

TEST(Attention, MatchesDirectFormula) {
  std::mt19937_64 rng(26);
  Var q = param(3, 4, rng), k = param(5, 4, rng), v = param(5, 4, rng);
  const Matrix out = attention(q, k, v, {{{0, 1, 2}, {0, 1, 2, 3, 4}}}, 2).value();
  for (int h = 0; h < 2; ++h) {
    Matrix s = q.value().middleCols(2 * h, 2) * k.value().middleCols(2 * h, 2).transpose() / std::sqrt(2.0);
    for (int r = 0; r < 3; ++r) {
      const double m = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - m).exp();
      s.row(r) /= s.row(r).sum();
    }
    EXPECT_LT((out.middleCols(2 * h, 2) - s * v.value().middleCols(2 * h, 2)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Attention, UncoveredQueriesAreZero) {
  std::mt19937_64 rng(27);
  Var q = param(3, 2, rng), k = param(2, 2, rng);
  const Matrix out = attention(q, k, k, {{{1}, {0, 1}}}, 1).value();
  EXPECT_EQ(out.row(0).norm(), 0.0);
  EXPECT_EQ(out.row(2).norm(), 0.0);
}

TEST(Attention, Gradients) {
  std::mt19937_64 rng(28);
  Var q = param(4, 6, rng), k = param(5, 6, rng), v = param(5, 6, rng);
  std::vector<AttentionGroup> groups{{{0, 1}, {0, 1, 2}}, {{2, 3}, {2, 3, 4}}};
  auto loss = [&] { return sum(mul(attention(q, k, v, groups, 3), attention(q, k, k, groups, 2))); };
  EXPECT_LT(check_gradients({q, k, v}, loss, 0, rng).worst, 1e-6);
}

TEST(Autodiff, NoGradGuardSkipsGraph) {
  Var a(Matrix::Ones(2, 2), true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    Var y = sum(mul(a, a));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  Var y = sum(mul(a, a));
  EXPECT_TRUE(y.requires_grad());
  backward(y);
  EXPECT_EQ(a.grad(), Matrix::Constant(2, 2, 2.0));
}

TEST(Autodiff, GradientsAccumulateUntilZeroed) {
  Var a(Matrix::Ones(1, 3), true);
  backward(sum(a));
  backward(sum(a));
  EXPECT_EQ(a.grad(), Matrix::Constant(1, 3, 2.0));
  a.zero_grad();
  backward(sum(scale(a, 3.0)));
  EXPECT_EQ(a.grad(), Matrix::Constant(1, 3, 3.0));
}
