#include <benchmark/benchmark.h>

#include "idv/descriptors.hpp"
#include "idv/graph.hpp"
#include "idv/ops.hpp"
#include "idv/trainer.hpp"

namespace {

idv::Tensor random_tensor(const idv::Shape& shape, idv::Rng& rng) {
  idv::Tensor t(shape, 0.0);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  idv::Rng rng(1);
  const idv::Tensor x = random_tensor({c, 32, 32}, rng);
  const idv::Tensor w = random_tensor({2 * c, c, 3, 3}, rng);
  const idv::Tensor b({2 * c}, 0.0);
  for (auto _ : state) {
    idv::Graph g;
    idv::Var y = idv::sum(idv::conv2d(g.input(x), g.variable(w), g.variable(b), 1, 1));
    g.backward(y);
    benchmark::DoNotOptimize(y.value()[0]);
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(3)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SgdStep(benchmark::State& state) {
  idv::ModelConfig cfg;
  cfg.num_identities = 8;
  idv::IdvModel model = idv::init_params(cfg, idv::Rng(2));
  idv::Rng rng(3);
  idv::PairBatch batch;
  for (int i = 0; i < state.range(0); ++i) {
    batch.images1.push_back(random_tensor({3, 32, 32}, rng));
    batch.images2.push_back(random_tensor({3, 32, 32}, rng));
    batch.t1.push_back(static_cast<std::size_t>(i % 8));
    batch.t2.push_back(static_cast<std::size_t>((i / 2) % 8));
    batch.same.push_back(batch.t1.back() == batch.t2.back());
  }
  idv::TrainConfig tc;
  for (auto _ : state) {
    const auto m = idv::sgd_step(model, batch, tc, 1e-4, idv::Rng(4));
    benchmark::DoNotOptimize(m.loss_total);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SgdStep)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Rank(benchmark::State& state) {
  idv::Rng rng(5);
  idv::DescriptorSet q, g;
  q.dim = g.dim = 64;
  for (int i = 0; i < 64 * 100; ++i) q.data.push_back(rng.normal());
  for (int i = 0; i < 64 * state.range(0); ++i) g.data.push_back(rng.normal());
  q.samples.resize(100);
  g.samples.resize(static_cast<std::size_t>(state.range(0)));
  q = idv::l2_normalize(q);
  g = idv::l2_normalize(g);
  for (auto _ : state) benchmark::DoNotOptimize(idv::rank(q, g));
}
BENCHMARK(BM_Rank)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
