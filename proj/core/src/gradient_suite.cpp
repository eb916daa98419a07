#include "idv/gradient_suite.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <memory>
#include <sstream>

#include "idv/error.hpp"
#include "idv/losses.hpp"
#include "idv/model.hpp"
#include "idv/ops.hpp"

namespace idv {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape, 0.0);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

/// Fixed random projection to a scalar, so non-scalar ops get a generic
/// upstream gradient instead of all ones.
Var project(Graph& g, Var x, const Tensor& w) {
  Var flat = flatten(x);
  return sum(linear(flat, g.input(w), g.input(Tensor({1}, 0.0))));
}

struct Case {
  std::shared_ptr<ParamStore> params = std::make_shared<ParamStore>();
  LossBuilder build;
  // Keeps a model alive for composite cases whose builder references it.
  std::shared_ptr<IdvModel> model;
};

using CaseFactory = std::function<Case(Rng&)>;

/// Case whose parameters are the op inputs; `op` maps leaf Vars to a tensor.
Case unary(Rng& rng, const Shape& shape, std::function<Var(Var)> op, double scale = 1.0) {
  Case c;
  c.params->add("x", random_tensor(shape, rng, scale));
  Graph probe;
  const std::size_t out = op(probe.param(c.params->get("x"))).value().size();
  Tensor w = random_tensor({1, out}, rng);
  c.build = [ps = c.params, op, w](Graph& g) { return project(g, op(g.param(ps->get("x"))), w); };
  return c;
}

Case binary(Rng& rng, const Shape& a, const Shape& b, std::function<Var(Var, Var)> op) {
  Case c;
  c.params->add("a", random_tensor(a, rng));
  c.params->add("b", random_tensor(b, rng));
  Graph probe;
  const std::size_t out = op(probe.param(c.params->get("a")), probe.param(c.params->get("b"))).value().size();
  Tensor w = random_tensor({1, out}, rng);
  c.build = [ps = c.params, op, w](Graph& g) {
    return project(g, op(g.param(ps->get("a")), g.param(ps->get("b"))), w);
  };
  return c;
}

Case conv_case(Rng& rng, std::size_t stride, std::size_t padding, bool batched) {
  Case c;
  const std::size_t cin = 1 + rng.uniform_index(3), cout = 1 + rng.uniform_index(3), k = 1 + 2 * rng.uniform_index(2);
  const std::size_t h = 5 + rng.uniform_index(3), w = 5 + rng.uniform_index(3);
  Shape in = batched ? Shape{2, cin, h, w} : Shape{cin, h, w};
  c.params->add("input", random_tensor(in, rng));
  c.params->add("weight", random_tensor({cout, cin, k, k}, rng, 0.5));
  c.params->add("bias", random_tensor({cout}, rng, 0.5));
  Graph probe;
  const std::size_t out = conv2d(probe.param(c.params->get("input")), probe.param(c.params->get("weight")),
                                 probe.param(c.params->get("bias")), stride, padding)
                              .value()
                              .size();
  Tensor proj = random_tensor({1, out}, rng);
  c.build = [ps = c.params, proj, stride, padding](Graph& g) {
    Var y = conv2d(g.param(ps->get("input")), g.param(ps->get("weight")), g.param(ps->get("bias")), stride, padding);
    return project(g, y, proj);
  };
  return c;
}

Case linear_case(Rng& rng) {
  Case c;
  const std::size_t din = 2 + rng.uniform_index(6), dout = 2 + rng.uniform_index(5);
  c.params->add("x", random_tensor({din}, rng));
  c.params->add("weight", random_tensor({dout, din}, rng));
  c.params->add("bias", random_tensor({dout}, rng));
  Tensor proj = random_tensor({1, dout}, rng);
  c.build = [ps = c.params, proj](Graph& g) {
    return project(g, linear(g.param(ps->get("x")), g.param(ps->get("weight")), g.param(ps->get("bias"))), proj);
  };
  return c;
}

Case dropout_case(Rng& rng) {
  const std::uint64_t mask_seed = rng.next_u64();
  const double rate = 0.2 + 0.5 * rng.uniform();
  return unary(rng, {3 + rng.uniform_index(6)}, [mask_seed, rate](Var x) {
    Rng mask(mask_seed);
    return dropout(x, rate, true, mask);
  });
}

Case loss_case(Rng& rng, const std::string& which) {
  Case c;
  const std::size_t k = 2 + rng.uniform_index(5);
  c.params->add("logits", random_tensor({k}, rng));
  const std::size_t target = rng.uniform_index(k);
  const bool same = rng.bernoulli(0.5);
  if (which == "identification") {
    c.build = [ps = c.params, target](Graph& g) {
      return identification_loss(softmax(g.param(ps->get("logits"))), target);
    };
  } else if (which == "verification") {
    c.params = std::make_shared<ParamStore>();
    c.params->add("logits", random_tensor({2}, rng));
    c.build = [ps = c.params, same](Graph& g) { return verification_loss(softmax(g.param(ps->get("logits"))), same); };
  } else {
    c.params->add("other", random_tensor({k}, rng));
    // margin large enough that the different-identity hinge is active
    const double margin = same ? 1.0 : 4.0 * static_cast<double>(k);
    c.build = [ps = c.params, same, margin](Graph& g) {
      return contrastive_loss(g.param(ps->get("logits")), g.param(ps->get("other")), same, margin);
    };
  }
  return c;
}

Case composite_case(Rng& rng, PoolingMode pooling, LossMode mode) {
  Case c;
  ModelConfig cfg;
  cfg.input_channels = 3;
  cfg.input_size = 8;
  cfg.backbone = {{3, 3, true}, {4, 3, false}};
  cfg.embedding_dim = 5;
  cfg.num_identities = 3;
  cfg.dropout_rate = 0.3;
  cfg.pooling = pooling;
  c.model = std::make_shared<IdvModel>(init_params(cfg, rng.stream("init")));
  const std::size_t side = pooling == PoolingMode::Mac ? 8 + 2 * rng.uniform_index(3) : 8;
  Tensor x1 = random_tensor({3, side, side}, rng);
  Tensor x2 = random_tensor({3, side, side}, rng);
  PairLabels labels{rng.uniform_index(3), rng.uniform_index(3)};
  if (rng.bernoulli(0.5)) labels.t2 = labels.t1;
  const Rng dropout_rng = rng.stream("dropout");
  IdvModel* m = c.model.get();
  c.build = [m, x1, x2, labels, dropout_rng, mode](Graph& g) {
    const PairOutput out = forward_pair(g, *m, x1, x2, true, dropout_rng);
    return pair_objective(out, labels, mode, LossWeights{}, 1.0).total;
  };
  return c;
}

const std::vector<std::pair<std::string, CaseFactory>>& factories() {
  static const std::vector<std::pair<std::string, CaseFactory>> all = {
      {"conv2d", [](Rng& r) { return conv_case(r, 1, 0, false); }},
      {"conv2d_padded", [](Rng& r) { return conv_case(r, 1, 1, false); }},
      {"conv2d_strided", [](Rng& r) { return conv_case(r, 2, 1, false); }},
      {"conv2d_batched", [](Rng& r) { return conv_case(r, 1, 1, true); }},
      {"relu", [](Rng& r) { return unary(r, {2, 3, 3}, [](Var x) { return relu(x); }); }},
      {"maxpool2", [](Rng& r) { return unary(r, {2, 4, 6}, [](Var x) { return maxpool2(x); }); }},
      {"global_max_pool", [](Rng& r) { return unary(r, {3, 3, 5}, [](Var x) { return global_max_pool(x); }); }},
      {"linear", [](Rng& r) { return linear_case(r); }},
      {"softmax", [](Rng& r) { return unary(r, {2 + r.uniform_index(6)}, [](Var x) { return softmax(x); }, 2.0); }},
      {"dropout", [](Rng& r) { return dropout_case(r); }},
      {"square_diff", [](Rng& r) { return binary(r, {6}, {6}, [](Var a, Var b) { return square_diff(a, b); }); }},
      {"add", [](Rng& r) { return binary(r, {2, 3}, {2, 3}, [](Var a, Var b) { return add(a, b); }); }},
      {"scale", [](Rng& r) { return unary(r, {5}, [](Var x) { return scale(x, -1.7); }); }},
      {"square", [](Rng& r) { return unary(r, {5}, [](Var x) { return square(x); }); }},
      {"flatten", [](Rng& r) { return unary(r, {2, 2, 3}, [](Var x) { return flatten(x); }); }},
      {"sum", [](Rng& r) { return unary(r, {4, 2}, [](Var x) { return scale(sum(x), 1.0); }); }},
      {"neg_log_at", [](Rng& r) {
         const std::size_t k = 2 + r.uniform_index(4), t = r.uniform_index(k);
         return unary(r, {k}, [t](Var x) { return neg_log_at(softmax(x), t); });
       }},
      {"neg_log_at_probs", [](Rng& r) {
         Case c;
         const std::size_t k = 2 + r.uniform_index(4), t = r.uniform_index(k);
         Tensor p({k}, 0.0);
         for (double& v : p.values()) v = 0.2 + r.uniform();
         c.params->add("x", std::move(p));
         c.build = [ps = c.params, t](Graph& g) { return neg_log_at(g.param(ps->get("x")), t); };
         return c;
       }},
      {"identification_loss", [](Rng& r) { return loss_case(r, "identification"); }},
      {"verification_loss", [](Rng& r) { return loss_case(r, "verification"); }},
      {"contrastive_loss", [](Rng& r) { return loss_case(r, "contrastive"); }},
      {"pair_objective_flatten", [](Rng& r) { return composite_case(r, PoolingMode::FixedFlatten, LossMode::IdentVerif); }},
      {"pair_objective_mac", [](Rng& r) { return composite_case(r, PoolingMode::Mac, LossMode::IdentVerif); }},
      {"pair_objective_contrastive", [](Rng& r) { return composite_case(r, PoolingMode::FixedFlatten, LossMode::Contrastive); }},
  };
  return all;
}

}  // namespace

std::vector<std::string> gradient_case_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : factories()) names.push_back(name);
  return names;
}

GradientSuiteReport run_gradient_suite(const GradientSuiteOptions& options) {
  if (options.instances == 0) throw InvalidArgument("gradient suite: instances must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  GradientSuiteReport report;
  const Rng root = Rng(options.seed).stream("gradient-suite");
  for (std::size_t i = 0; i < options.instances; ++i) {
    for (const auto& [name, factory] : factories()) {
      Rng rng = root.stream(name).stream(static_cast<std::uint64_t>(i));
      Case c = factory(rng);
      ParamStore& params = c.model ? c.model->params : *c.params;
      GradCheckOptions gc;
      gc.step = options.step;
      gc.tolerance = options.tolerance;
      gc.denominator_floor = options.denominator_floor;
      gc.seed = rng.next_u64();
      GradientCase result{name, i, grad_check(c.build, params, gc)};
      report.max_rel_error = std::max(report.max_rel_error, result.report.max_rel_error);
      for (const auto& p : result.report.params) {
        report.checked += p.checked;
        report.skipped_nonsmooth += p.skipped_nonsmooth;
      }
      report.passed = report.passed && result.report.passed;
      report.cases.push_back(std::move(result));
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string GradientSuiteReport::summary() const {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%zu cases, %zu elements checked, %zu skipped at kinks, max rel. error %.3e, %.2f s: %s\n",
                cases.size(), checked, skipped_nonsmooth, max_rel_error, seconds, passed ? "PASS" : "FAIL");
  out << buf;
  for (const auto& c : cases) {
    if (c.report.passed) continue;
    out << "  " << c.name << " #" << c.instance << ": " << c.report.summary();
  }
  return out.str();
}

}  // namespace idv
