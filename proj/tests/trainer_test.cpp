#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "idv/error.hpp"
#include "idv/file_util.hpp"
#include "idv/losses.hpp"
#include "idv/trainer.hpp"

using namespace idv;
using idv::testing::random_tensor;

namespace {

PairBatch random_batch(std::size_t n, std::size_t K, Rng& rng) {
  PairBatch b;
  for (std::size_t i = 0; i < n; ++i) {
    b.images1.push_back(random_tensor({3, 8, 8}, rng));
    b.images2.push_back(random_tensor({3, 8, 8}, rng));
    b.t1.push_back(rng.uniform_index(K));
    b.t2.push_back(i % 2 ? b.t1.back() : rng.uniform_index(K));
    b.same.push_back(b.t1.back() == b.t2.back());
  }
  return b;
}

double abs_max(const Tensor& t) { return max_abs_diff(t, Tensor(t.shape(), 0.0)); }

TrainConfig plain(double lr = 0.1) {
  TrainConfig c;
  c.base_lr = lr;
  return c;
}

// Small run on a generated toy set: seconds, not minutes.
RunConfig quick_run(const std::string& manifest, std::uint64_t seed) {
  RunConfig cfg = idv::testing::fast_run_config(manifest, seed);
  cfg.model.backbone = {{4, 3, true}, {8, 3, false}};
  cfg.model.embedding_dim = 8;
  cfg.train.max_epochs = 4;
  cfg.train.final_lr_epochs = 1;
  cfg.train.checkpoint_every = 2;
  return cfg;
}

}  // namespace

TEST(LearningRate, Boundaries) {
  TrainConfig c;
  EXPECT_EQ(lr_at_epoch(c, 0), 0.001);
  EXPECT_EQ(lr_at_epoch(c, 69), 0.001);
  EXPECT_EQ(lr_at_epoch(c, 70), 0.0001);
  EXPECT_EQ(lr_at_epoch(c, 74), 0.0001);
  EXPECT_THROW(lr_at_epoch(c, 75), InvalidArgument);
  EXPECT_THROW(lr_at_epoch(c, -1), InvalidArgument);
}

TEST(SgdStep, ZeroLearningRateKeepsParameters) {
  Rng rng(1);
  IdvModel m = init_params(idv::testing::tiny_model(4), Rng(2));
  const ParamStore before = m.params;
  sgd_step(m, random_batch(3, 4, rng), plain(0.0), 0.0, Rng(3));
  EXPECT_TRUE(m.params.same_values(before));
}

TEST(SgdStep, SinglePairMatchesManualComposition) {
  Rng rng(4);
  IdvModel m = init_params(idv::testing::tiny_model(4), Rng(5));
  const PairBatch b = random_batch(1, 4, rng);
  const TrainConfig cfg = plain();

  IdvModel manual = m;
  Graph g;
  const PairOutput out = forward_pair(g, manual, b.images1[0], b.images2[0], true, Rng(6).stream(0));
  const Var loss = combined_objective(out.p1, out.p2, out.q, b.t1[0], b.t2[0], b.same[0], cfg.weights);
  g.backward(loss, manual.params);

  const BatchMetrics metrics = sgd_step(m, b, cfg, 0.1, Rng(6));
  EXPECT_NEAR(metrics.loss_total, loss.value()[0], 1e-12);
  for (const auto& p : manual.params) {
    const Tensor& got = m.params.get(p.name).value;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      EXPECT_NEAR(got[i], p.value[i] - 0.1 * p.grad[i], 1e-12) << p.name;
    }
  }
}

TEST(SgdStep, BatchGradientIsMeanOfPairGradients) {
  Rng rng(7);
  IdvModel m = init_params(idv::testing::tiny_model(3), Rng(8));
  const PairBatch b = random_batch(4, 3, rng);
  accumulate_batch_gradients(m, b, plain(), Rng(9));
  ParamGrads sum = m.params.zero_grads_like();
  for (std::size_t i = 0; i < 4; ++i) {
    PairBatch one;
    one.images1 = {b.images1[i]};
    one.images2 = {b.images2[i]};
    one.t1 = {b.t1[i]};
    one.t2 = {b.t2[i]};
    one.same = {b.same[i]};
    IdvModel copy = m;
    // Pair i of the batch drew from stream i; a one-pair batch uses stream 0.
    Graph g;
    const PairOutput out = forward_pair(g, copy, one.images1[0], one.images2[0], true, Rng(9).stream(i));
    const PairObjective obj = pair_objective(out, {one.t1[0], one.t2[0]}, LossMode::IdentVerif, {}, 1.0);
    g.backward(obj.total, 0.25);
    g.accumulate_param_grads(sum);
  }
  for (const auto& p : m.params) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) EXPECT_NEAR(p.grad[i], sum[p.index][i], 1e-12);
  }
}

TEST(SgdStep, ModesLeaveUnusedHeadUntouched) {
  Rng rng(10);
  const PairBatch b = random_batch(4, 3, rng);
  TrainConfig cfg = plain();
  cfg.loss_mode = LossMode::Ident;
  IdvModel m = init_params(idv::testing::tiny_model(3), Rng(11));
  accumulate_batch_gradients(m, b, cfg, Rng(12));
  EXPECT_EQ(abs_max(m.params.get(param_names::kVerifWeight).grad), 0.0);
  EXPECT_EQ(abs_max(m.params.get(param_names::kVerifBias).grad), 0.0);
  EXPECT_GT(abs_max(m.params.get(param_names::kIdentWeight).grad), 0.0);

  cfg.loss_mode = LossMode::Verif;
  accumulate_batch_gradients(m, b, cfg, Rng(12));
  EXPECT_EQ(abs_max(m.params.get(param_names::kIdentWeight).grad), 0.0);
  EXPECT_GT(abs_max(m.params.get(param_names::kVerifWeight).grad), 0.0);
}

TEST(SgdStep, WorkerCountDoesNotChangeResult) {
  Rng rng(13);
  const PairBatch b = random_batch(7, 4, rng);
  IdvModel a = init_params(idv::testing::tiny_model(4), Rng(14)), c = a;
  TrainConfig cfg = plain();
  sgd_step(a, b, cfg, 0.05, Rng(15));
  cfg.workers = 3;
  sgd_step(c, b, cfg, 0.05, Rng(15));
  EXPECT_TRUE(a.params.same_values(c.params));
}

TEST(SgdStep, MomentumAndWeightDecay) {
  Rng rng(16);
  const PairBatch b = random_batch(2, 3, rng);
  IdvModel m = init_params(idv::testing::tiny_model(3), Rng(17));
  TrainConfig cfg = plain();
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.01;
  MomentumState v = m.params;
  for (auto& p : v) p.value.fill(0.5);
  IdvModel ref = m;
  accumulate_batch_gradients(ref, b, cfg, Rng(18));
  EXPECT_THROW(sgd_step(m, b, cfg, 0.1, Rng(18)), InvalidArgument);
  sgd_step(m, b, cfg, 0.1, Rng(18), &v);
  for (const auto& p : ref.params) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double vel = 0.9 * 0.5 + p.grad[i] + 0.01 * p.value[i];
      EXPECT_NEAR(v.at(p.index).value[i], vel, 1e-12);
      EXPECT_NEAR(m.params.at(p.index).value[i], p.value[i] - 0.1 * vel, 1e-12);
    }
  }
}

TEST(SgdStep, NonFiniteLossNamesTheOp) {
  Rng rng(19);
  IdvModel m = init_params(idv::testing::tiny_model(3), Rng(20));
  m.params.get(param_names::kEmbedWeight).value[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    sgd_step(m, random_batch(2, 3, rng), plain(), 0.1, Rng(21));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("pair 0"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("produced by"), std::string::npos) << e.what();
  }
}

TEST(SgdStep, FullBatchLossDecreasesWithSmallSteps) {
  ModelConfig mc = idv::testing::tiny_model(3);
  mc.dropout_rate = 0.0;
  IdvModel m = init_params(mc, Rng(22));
  Rng rng(23);
  const PairBatch b = random_batch(6, 3, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 30; ++step) {
    const BatchMetrics before = sgd_step(m, b, plain(), 0.01, Rng(24));
    EXPECT_LE(before.loss_total, prev + 1e-12) << "step " << step;
    prev = before.loss_total;
  }
  const BatchMetrics last = accumulate_batch_gradients(m, b, plain(), Rng(24));
  EXPECT_LT(last.loss_total, prev);
}

TEST(Train, DeterministicWithLogAndCheckpoints) {
  idv::testing::TempDir dir("train");
  const auto manifest = load_manifest(generate_toy_dataset(idv::testing::small_toy(3, 2.0, 1), dir / "data"));
  const RunConfig cfg = quick_run("m.csv", 3);
  TrainOptions opts;
  opts.out_dir = dir / "run";
  int callbacks = 0;
  opts.on_epoch = [&](const EpochLog&) { ++callbacks; };
  const TrainResult a = train(manifest, cfg, opts);
  const TrainResult b = train(manifest, cfg);
  EXPECT_EQ(callbacks, 4);
  EXPECT_EQ(a.model.config.num_identities, 3u);
  EXPECT_TRUE(a.model.params.same_values(b.model.params));
  EXPECT_EQ(encode_checkpoint(a.checkpoint), encode_checkpoint(b.checkpoint));
  EXPECT_TRUE(std::filesystem::exists(checkpoint_path(opts.out_dir, 2)));
  EXPECT_TRUE(std::filesystem::exists(checkpoint_path(opts.out_dir, 4)));
  EXPECT_EQ(read_file(opts.out_dir / "final.idvc"), encode_checkpoint(a.checkpoint));
  const std::string csv = read_file(opts.out_dir / "epochs.csv");
  EXPECT_EQ(csv.rfind(kEpochLogHeader, 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(a.log[3].lr, 0.001);
  EXPECT_EQ(a.log[0].lr, 0.01);

  RunConfig other = cfg;
  other.train.seed = 4;
  EXPECT_FALSE(train(manifest, other).model.params.same_values(a.model.params));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  idv::testing::TempDir dir("resume");
  const auto manifest = load_manifest(generate_toy_dataset(idv::testing::small_toy(3, 2.0, 2), dir / "data"));
  const RunConfig cfg = quick_run("m.csv", 5);
  const TrainResult full = train(manifest, cfg);
  TrainOptions first;
  first.out_dir = dir / "run";
  first.stop_after = 2;
  train(manifest, cfg, first);
  TrainOptions second;
  second.out_dir = dir / "run";
  second.resume = load_checkpoint(checkpoint_path(first.out_dir, 2));
  const TrainResult resumed = train(manifest, cfg, second);
  EXPECT_EQ(encode_checkpoint(resumed.checkpoint), encode_checkpoint(full.checkpoint));
  EXPECT_EQ(std::count_if(resumed.log.begin(), resumed.log.end(), [](const EpochLog&) { return true; }), 2);

  RunConfig changed = cfg;
  changed.train.base_lr = 0.02;
  EXPECT_THROW(train(manifest, changed, second), InvalidArgument);
}

TEST(Train, MomentumRunResumesExactly) {
  idv::testing::TempDir dir("resume_m");
  const auto manifest = load_manifest(generate_toy_dataset(idv::testing::small_toy(3, 2.0, 3), dir / "data"));
  RunConfig cfg = quick_run("m.csv", 6);
  cfg.train.workers = 2;
  const TrainResult full = train(manifest, cfg);
  TrainOptions first;
  first.stop_after = 1;
  TrainOptions second;
  second.resume = train(manifest, cfg, first).checkpoint;
  EXPECT_FALSE(second.resume->momentum.size() == 0);
  cfg.train.workers = 1;
  EXPECT_EQ(encode_checkpoint(train(manifest, cfg, second).checkpoint), encode_checkpoint(full.checkpoint));
}

TEST(Train, RejectsMismatchedIdentityCount) {
  idv::testing::TempDir dir("kmismatch");
  const auto manifest = load_manifest(generate_toy_dataset(idv::testing::small_toy(3, 2.0, 1), dir / "data"));
  RunConfig cfg = quick_run("m.csv", 1);
  cfg.model.num_identities = 5;
  EXPECT_THROW(train(manifest, cfg), InvalidArgument);
}

TEST(Train, EpochRowFormat) {
  EpochLog row;
  row.epoch = 3;
  row.lr = 0.001;
  row.neg_ratio = 1.5;
  row.acc_id = 0.5;
  EXPECT_EQ(format_epoch_row(row), "3,0.001,1.5,0,0,0,0.500000,0.000000");
}
