#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "idv/error.hpp"
#include "idv/graph.hpp"
#include "idv/ops.hpp"
#include "oracles.hpp"

using namespace idv;
using idv::testing::random_tensor;

namespace {

/// Gradient of sum(w .* op(x)) with respect to x, analytic and numeric.
struct GradPair {
  Tensor analytic;
  Tensor numeric;
};

GradPair op_gradients(const std::function<Var(Var)>& op, const Tensor& x, const Tensor& proj, double h) {
  auto value = [&](const Tensor& at) {
    Graph g;
    const Tensor& y = op(g.input(at)).value();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    return s;
  };
  Graph g;
  Var xv = g.variable(x);
  Var y = op(xv);
  Var loss = sum(linear(flatten(y), g.input(proj.reshaped({1, proj.size()})), g.input(Tensor({1}, 0.0))));
  g.backward(loss);
  return {xv.grad(), oracle::numeric_gradient(value, x, h)};
}

double max_rel_error(const Tensor& a, const Tensor& n) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(a[i]) + std::abs(n[i]), 1e-8);
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  Graph g;
  Tensor x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  Var y = conv2d(g.input(x), g.input(Tensor({1, 1, 1, 1}, 1.0)), g.input(Tensor({1}, 0.0)));
  EXPECT_EQ(y.value(), x);
}

TEST(Conv2d, SumOfOnes) {
  Graph g;
  Var y = conv2d(g.input(Tensor({1, 3, 3}, 1.0)), g.input(Tensor({1, 1, 3, 3}, 1.0)),
                 g.input(Tensor({1}, 0.0)));
  ASSERT_EQ(y.value().size(), 1u);
  EXPECT_EQ(y.value()[0], 9.0);
}

TEST(Conv2d, MatchesLoopOracle) {
  Rng rng(1);
  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 0}, {2, 1}, {2, 0}}) {
    Tensor x = random_tensor({2, 4, 4}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Graph g;
    Var y = conv2d(g.input(x), g.input(w), g.input(b), stride, pad);
    const Tensor ref = oracle::conv2d(x, w, b, stride, pad);
    ASSERT_EQ(y.value().shape(), ref.shape());
    EXPECT_LE(max_abs_diff(y.value(), ref), 1e-12);
  }
}

TEST(Conv2d, BatchedMatchesPerImage) {
  Rng rng(2);
  Tensor x = random_tensor({2, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  Graph g;
  const Tensor& y = conv2d(g.input(x), g.input(w), g.input(b), 1, 1).value();
  ASSERT_EQ(y.shape(), (Shape{2, 3, 5, 5}));
  for (std::size_t n = 0; n < 2; ++n) {
    Tensor xi({2, 5, 5}, std::vector<double>(x.values().begin() + n * 50, x.values().begin() + (n + 1) * 50));
    const Tensor ref = oracle::conv2d(xi, w, b, 1, 1);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[n * 75 + i], ref[i], 1e-12);
  }
}

TEST(Conv2d, ErrorsNameTheDimension) {
  Graph g;
  try {
    conv2d(g.input(Tensor({2, 4, 4}, 0.0)), g.input(Tensor({1, 3, 3, 3}, 0.0)), g.input(Tensor({1}, 0.0)));
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(g.input(Tensor({1, 2, 2}, 0.0)), g.input(Tensor({1, 1, 3, 3}, 0.0)),
                      g.input(Tensor({1}, 0.0))),
               InvalidArgument);
  EXPECT_THROW(conv2d(g.input(Tensor({1, 4, 4}, 0.0)), g.input(Tensor({1, 1, 3, 3}, 0.0)),
                      g.input(Tensor({1}, 0.0)), 0),
               InvalidArgument);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  Tensor w = random_tensor({2, 2, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  Tensor x = random_tensor({2, 5, 5}, rng);
  Tensor proj = random_tensor({2 * 3 * 3}, rng);
  auto op = [&](Var in) { return conv2d(in, in.graph().input(w), in.graph().input(b), 2, 1); };
  const auto gp = op_gradients(op, x, proj, 1e-5);
  EXPECT_LE(max_rel_error(gp.analytic, gp.numeric), 1e-6);
}

TEST(Relu, Definition) {
  Graph g;
  Var x = g.variable(Tensor({3}, std::vector<double>{-1, 0, 2}));
  Var y = relu(x);
  EXPECT_EQ(y.value(), Tensor({3}, std::vector<double>({0, 0, 2})));
  g.backward(sum(y));
  EXPECT_EQ(x.grad(), Tensor({3}, std::vector<double>({0, 0, 1})));
}

TEST(Relu, AllNegativeGivesZeroGradient) {
  Graph g;
  Var x = g.variable(Tensor({4}, -3.0));
  Var y = relu(x);
  g.backward(sum(y));
  EXPECT_EQ(y.value(), Tensor({4}, 0.0));
  EXPECT_EQ(x.grad(), Tensor({4}, 0.0));
}

TEST(Relu, GradientMatchesFiniteDifferencesAwayFromZero) {
  Rng rng(4);
  Tensor x = random_tensor({20}, rng);
  for (double& v : x.values()) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  const auto gp = op_gradients([](Var v) { return relu(v); }, x, random_tensor({20}, rng), 1e-5);
  EXPECT_LE(max_rel_error(gp.analytic, gp.numeric), 1e-6);
}

TEST(MaxPool2, SmallExample) {
  Graph g;
  Var y = maxpool2(g.input(Tensor({1, 2, 2}, std::vector<double>{1, 2, 3, 4})));
  EXPECT_EQ(y.value(), Tensor({1, 1, 1}, 4.0));
}

TEST(MaxPool2, TiesRouteGradientToFirstIndex) {
  Graph g;
  Var x = g.variable(Tensor({1, 4, 4}, 2.0));
  Var y = maxpool2(x);
  EXPECT_EQ(y.value(), Tensor({1, 2, 2}, 2.0));
  g.backward(sum(y));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(x.grad().at(0, r, c), (r % 2 == 0 && c % 2 == 0) ? 1.0 : 0.0);
    }
  }
}

TEST(MaxPool2, MatchesWindowOracle) {
  Rng rng(5);
  Tensor x = random_tensor({3, 8, 8}, rng);
  Graph g;
  EXPECT_EQ(maxpool2(g.input(x)).value(), oracle::maxpool2(x));
  EXPECT_THROW(maxpool2(g.input(Tensor({1, 3, 4}, 0.0))), InvalidArgument);
}

TEST(GlobalMaxPool, ConstantMapAndShape) {
  Graph g;
  EXPECT_EQ(global_max_pool(g.input(Tensor({3, 5, 7}, 7.0))).value(), Tensor({3}, 7.0));
  EXPECT_EQ(global_max_pool(g.input(Tensor({4, 32, 32}, 0.0))).value().size(), 4u);
  EXPECT_EQ(global_max_pool(g.input(Tensor({4, 48, 48}, 0.0))).value().size(), 4u);
}

TEST(GlobalMaxPool, MatchesChannelOracle) {
  Rng rng(6);
  Tensor x = random_tensor({4, 5, 9}, rng);
  Graph g;
  EXPECT_EQ(global_max_pool(g.input(x)).value(), oracle::channel_max(x));
}

TEST(Linear, Examples) {
  Graph g;
  Var y = linear(g.input(Tensor({2}, std::vector<double>{2, 3})), g.input(Tensor({1, 2}, 1.0)),
                 g.input(Tensor({1}, 0.0)));
  EXPECT_EQ(y.value(), Tensor({1}, 5.0));
  Tensor eye({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor x({3}, std::vector<double>{4, -5, 6});
  EXPECT_EQ(linear(g.input(x), g.input(eye), g.input(Tensor({3}, 0.0))).value(), x);
  EXPECT_THROW(linear(g.input(x), g.input(Tensor({2, 2}, 0.0)), g.input(Tensor({2}, 0.0))), InvalidArgument);
}

TEST(Linear, JacobianMatchesFiniteDifferences) {
  Rng rng(7);
  Tensor w = random_tensor({5, 8}, rng);
  Tensor b = random_tensor({5}, rng);
  const auto gp = op_gradients([&](Var v) { return linear(v, v.graph().input(w), v.graph().input(b)); },
                               random_tensor({8}, rng), random_tensor({5}, rng), 1e-5);
  EXPECT_LE(max_rel_error(gp.analytic, gp.numeric), 1e-6);
}

TEST(Softmax, SymmetricAndStable) {
  Graph g;
  EXPECT_EQ(softmax(g.input(Tensor({2}, 0.0))).value(), Tensor({2}, 0.5));
  const Tensor& p = softmax(g.input(Tensor({3}, 1000.0))).value();
  for (double v : p.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(softmax(g.input(Tensor({1}, 0.0))), InvalidArgument);
}

TEST(Softmax, SumsToOneForLargeLogits) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    const Tensor& p = softmax(g.input(random_tensor({7}, rng, 1000.0))).value();
    double s = 0.0;
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, CrossEntropyGradientIsPMinusOneHot) {
  Rng rng(9);
  Tensor z = random_tensor({6}, rng);
  const std::size_t t = 4;
  Graph g;
  Var zv = g.variable(z);
  Var p = softmax(zv);
  g.backward(neg_log_at(p, t));
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_NEAR(zv.grad()[i], p.value()[i] - (i == t ? 1.0 : 0.0), 1e-15);
  }
  auto f = [&](const Tensor& at) {
    Graph h;
    return neg_log_at(softmax(h.input(at)), t).value()[0];
  };
  EXPECT_LE(max_rel_error(zv.grad(), oracle::numeric_gradient(f, z, 1e-5)), 1e-6);
}

TEST(Softmax, CrossEntropyStaysFiniteWhenProbabilityUnderflows) {
  Graph g;
  Var z = g.variable(Tensor({2}, std::vector<double>{0.0, 2000.0}));
  Var loss = neg_log_at(softmax(z), 0);
  EXPECT_DOUBLE_EQ(loss.value()[0], 2000.0);
  g.backward(loss);
  EXPECT_DOUBLE_EQ(z.grad()[0], -1.0);
  EXPECT_DOUBLE_EQ(z.grad()[1], 1.0);
}

TEST(Dropout, IdentityWhenRateZeroOrEval) {
  Graph g;
  Rng rng(1);
  Var x = g.input(Tensor({5}, 3.0));
  EXPECT_EQ(dropout(x, 0.0, true, rng).id(), x.id());
  EXPECT_EQ(dropout(x, 0.7, false, rng).id(), x.id());
  EXPECT_THROW(dropout(x, 1.0, true, rng), InvalidArgument);
  EXPECT_THROW(dropout(x, -0.1, true, rng), InvalidArgument);
}

TEST(Dropout, SurvivorFractionAndMean) {
  Graph g;
  Rng rng(10);
  const std::size_t n = 100000;
  const Tensor& y = dropout(g.input(Tensor({n}, 1.0)), 0.5, true, rng).value();
  std::size_t survivors = 0;
  double total = 0.0;
  for (double v : y.values()) {
    survivors += v != 0.0;
    total += v;
    EXPECT_TRUE(v == 0.0 || v == 2.0);
  }
  EXPECT_NEAR(static_cast<double>(survivors) / n, 0.5, 0.01);
  EXPECT_NEAR(total / n, 1.0, 0.02);
}

TEST(Dropout, SameStreamSameMask) {
  Graph g;
  Rng a(12), b(12);
  Var x = g.input(Tensor({50}, 1.0));
  EXPECT_EQ(dropout(x, 0.3, true, a).value(), dropout(x, 0.3, true, b).value());
}

TEST(SquareDiff, Examples) {
  Graph g;
  Var a = g.variable(Tensor({2}, std::vector<double>{1, 2}));
  Var b = g.variable(Tensor({2}, std::vector<double>{3, 1}));
  EXPECT_EQ(square_diff(a, b).value(), Tensor({2}, std::vector<double>({4, 1})));
  EXPECT_EQ(square_diff(a, b).value(), square_diff(b, a).value());
  Var same = square_diff(a, a);
  EXPECT_EQ(same.value(), Tensor({2}, 0.0));
  g.backward(sum(same));
  EXPECT_EQ(a.grad(), Tensor({2}, 0.0));
  EXPECT_THROW(square_diff(a, g.input(Tensor({3}, 0.0))), InvalidArgument);
}

TEST(SquareDiff, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  Tensor other = random_tensor({6}, rng);
  const auto gp = op_gradients([&](Var v) { return square_diff(v, v.graph().input(other)); },
                               random_tensor({6}, rng), random_tensor({6}, rng), 1e-5);
  EXPECT_LE(max_rel_error(gp.analytic, gp.numeric), 1e-6);
  const auto gq = op_gradients([&](Var v) { return square_diff(v.graph().input(other), v); },
                               random_tensor({6}, rng), random_tensor({6}, rng), 1e-5);
  EXPECT_LE(max_rel_error(gq.analytic, gq.numeric), 1e-6);
}

TEST(Ops, PureFunctionsAreBitwiseRepeatable) {
  Rng rng(13);
  Tensor x = random_tensor({2, 6, 6}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  auto run = [&] {
    Graph g;
    return global_max_pool(maxpool2(relu(conv2d(g.input(x), g.input(w), g.input(b), 1, 1)))).value();
  };
  EXPECT_EQ(run(), run());
}
