#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "idv/error.hpp"
#include "idv/grad_check.hpp"
#include "idv/gradient_suite.hpp"
#include "idv/losses.hpp"
#include "idv/model.hpp"
#include "idv/ops.hpp"

using namespace idv;
using idv::testing::random_tensor;

namespace {

/// sum(x^2) whose backward is deliberately scaled by two.
Var broken_square_sum(Var x) {
  Graph& g = x.graph();
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  const std::size_t id = x.id();
  return g.record("broken", Tensor::scalar(s), {x}, [id](Graph& graph, std::size_t self) {
    const double go = graph.grad(self)[0];
    const Tensor& v = graph.value(id);
    Tensor& gx = graph.grad_mut(id);
    for (std::size_t i = 0; i < v.size(); ++i) gx[i] += go * 2.0 * (2.0 * v[i]);
  });
}

}  // namespace

TEST(GradCheck, LinearLayerPassesTightly) {
  Rng rng(1);
  ParamStore ps;
  ps.add("w", random_tensor({4, 6}, rng));
  ps.add("b", random_tensor({4}, rng));
  const Tensor x = random_tensor({6}, rng);
  const Tensor proj = random_tensor({1, 4}, rng);
  auto build = [&](Graph& g) {
    Var y = linear(g.input(x), g.param(ps.get("w")), g.param(ps.get("b")));
    return sum(linear(y, g.input(proj), g.input(Tensor({1}, 0.0))));
  };
  GradCheckOptions opts;
  opts.step = 1e-5;
  opts.tolerance = 1e-6;
  const auto report = grad_check(build, ps, opts);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_LE(report.max_rel_error, 1e-6);
  ASSERT_EQ(report.params.size(), 2u);
  EXPECT_EQ(report.params[0].checked, 24u);
}

TEST(GradCheck, FullObjectiveOnTwoPairs) {
  Rng rng(2);
  IdvModel model = init_params(idv::testing::tiny_model(3), rng.stream("init"));
  std::vector<Tensor> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_tensor({3, 8, 8}, rng));
  const Rng drop = rng.stream("dropout");
  auto build = [&](Graph& g) {
    const PairOutput a = forward_pair(g, model, xs[0], xs[1], true, drop.stream(std::uint64_t{0}));
    const PairOutput b = forward_pair(g, model, xs[2], xs[3], true, drop.stream(std::uint64_t{1}));
    Var la = pair_objective(a, {0, 0}, LossMode::IdentVerif, {}, 1.0).total;
    Var lb = pair_objective(b, {1, 2}, LossMode::IdentVerif, {}, 1.0).total;
    return scale(add(la, lb), 0.5);
  };
  GradCheckOptions opts;
  opts.step = 1e-4;
  opts.tolerance = 1e-4;
  opts.denominator_floor = 1e-5;
  const auto report = grad_check(build, model.params, opts);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_EQ(report.params.size(), model.params.size());
}

TEST(GradCheck, CorruptedGradientIsCaughtAndNamed) {
  Rng rng(3);
  ParamStore ps;
  ps.add("good", random_tensor({3}, rng));
  ps.add("bad", random_tensor({3}, rng));
  auto build = [&](Graph& g) {
    return add(sum(square(g.param(ps.get("good")))), broken_square_sum(g.param(ps.get("bad"))));
  };
  const auto report = grad_check(build, ps);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.failures(), std::vector<std::string>{"bad"});
  EXPECT_NEAR(report.params[1].max_rel_error, 1.0 / 3.0, 1e-6);
}

TEST(GradCheck, NonDeterministicBuilderIsAnError) {
  ParamStore ps;
  ps.add("w", Tensor({2}, 1.0));
  int calls = 0;
  auto build = [&](Graph& g) {
    ++calls;
    return scale(sum(g.param(ps.get("w"))), static_cast<double>(calls));
  };
  EXPECT_THROW(grad_check(build, ps), Error);
}

TEST(GradCheck, RestoresParametersAndLeavesGradsAlone) {
  Rng rng(4);
  ParamStore ps;
  ps.add("w", random_tensor({5}, rng));
  ps.get("w").grad = Tensor({5}, 42.0);
  const Tensor before = ps.get("w").value;
  grad_check([&](Graph& g) { return sum(square(g.param(ps.get("w")))); }, ps);
  EXPECT_EQ(ps.get("w").value, before);
  EXPECT_EQ(ps.get("w").grad, Tensor({5}, 42.0));
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0, 1e-8), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0, 1e-8), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0, 1e-8), 1e-4);
}

TEST(GradientSuite, CoversEveryOpAndPasses) {
  const auto names = gradient_case_names();
  for (const char* op : {"conv2d", "relu", "maxpool2", "global_max_pool", "linear", "softmax", "dropout",
                         "square_diff", "contrastive_loss", "pair_objective_flatten", "pair_objective_mac"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), op), names.end()) << op;
  }
  GradientSuiteOptions opts;
  opts.instances = 2;
  const auto report = run_gradient_suite(opts);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_EQ(report.cases.size(), 2 * names.size());
}
