#include "idv/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "idv/error.hpp"
#include "idv/file_util.hpp"
#include "idv/log.hpp"
#include "idv/losses.hpp"
#include "idv/ops.hpp"

namespace idv {

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.max_epochs) {
    throw InvalidArgument("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(cfg.max_epochs) + ")");
  }
  return epoch < cfg.max_epochs - cfg.final_lr_epochs ? cfg.base_lr : cfg.final_lr;
}

namespace {

std::size_t argmax(const Tensor& t) {
  return static_cast<std::size_t>(
      std::max_element(t.values().begin(), t.values().end()) - t.values().begin());
}

struct PairResult {
  double total = 0.0, verif = 0.0, ident = 0.0;
  int ident_hits = 0;
  bool verif_hit = false;
  std::string nonfinite;
};

PairResult run_pair(const IdvModel& model, const PairBatch& batch, std::size_t i,
                    const TrainConfig& cfg, const Rng& rng, double seed, ParamStore* store,
                    ParamGrads* sink) {
  Graph g;
  const PairOutput out = forward_pair(g, model, batch.images1[i], batch.images2[i], true, rng.stream(i));
  const PairLabels labels{batch.t1[i], batch.t2[i]};
  const PairObjective obj = pair_objective(out, labels, cfg.loss_mode, cfg.weights, cfg.margin);
  PairResult r;
  r.total = obj.total.value()[0];
  if (!std::isfinite(r.total)) {
    r.nonfinite = g.first_nonfinite().value_or("loss");
    return r;
  }
  if (obj.verification.valid()) r.verif = obj.verification.value()[0];
  if (obj.contrastive.valid()) r.verif = obj.contrastive.value()[0];
  if (obj.ident1.valid()) r.ident = 0.5 * (obj.ident1.value()[0] + obj.ident2.value()[0]);
  r.ident_hits = (argmax(out.p1.value()) == labels.t1) + (argmax(out.p2.value()) == labels.t2);
  r.verif_hit = (out.q.value()[0] > out.q.value()[1]) == labels.same();
  g.backward(obj.total, seed);
  if (store) g.accumulate_param_grads(*store);
  if (sink) g.accumulate_param_grads(*sink);
  return r;
}

BatchMetrics forward_backward(IdvModel& model, const PairBatch& batch, const TrainConfig& cfg,
                              const Rng& rng) {
  const std::size_t n = batch.size();
  if (n == 0) throw InvalidArgument("sgd_step: empty batch");
  model.params.zero_grad();
  const double seed = 1.0 / static_cast<double>(n);
  std::vector<PairResult> results(n);

  const std::size_t workers = std::min(cfg.workers, n);
  if (workers <= 1) {
    // Each pair owns exactly one leaf per parameter, so accumulating straight
    // into the store gives the same sums as per-pair buffers reduced in order.
    for (std::size_t i = 0; i < n; ++i) {
      results[i] = run_pair(model, batch, i, cfg, rng, seed, &model.params, nullptr);
      if (!results[i].nonfinite.empty()) break;
    }
  } else {
    std::vector<ParamGrads> per_pair(n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) {
            per_pair[i] = model.params.zero_grads_like();
            results[i] = run_pair(model, batch, i, cfg, rng, seed, nullptr, &per_pair[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!results[i].nonfinite.empty()) break;
      for (auto& p : model.params) add_into(p.grad, per_pair[i][p.index]);
    }
  }

  BatchMetrics m;
  m.pairs = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = results[i];
    if (!r.nonfinite.empty()) {
      throw NumericError("non-finite loss at pair " + std::to_string(i) +
                         "; first non-finite value produced by " + r.nonfinite);
    }
    m.loss_total += r.total;
    m.loss_verif += r.verif;
    m.loss_ident += r.ident;
    m.acc_ident += r.ident_hits;
    m.acc_verif += r.verif_hit ? 1.0 : 0.0;
  }
  const double dn = static_cast<double>(n);
  m.loss_total /= dn;
  m.loss_verif /= dn;
  m.loss_ident /= dn;
  m.acc_ident /= 2.0 * dn;
  m.acc_verif /= dn;
  return m;
}

}  // namespace

BatchMetrics accumulate_batch_gradients(IdvModel& model, const PairBatch& batch,
                                        const TrainConfig& cfg, const Rng& rng) {
  return forward_backward(model, batch, cfg, rng);
}

BatchMetrics sgd_step(IdvModel& model, const PairBatch& batch, const TrainConfig& cfg, double lr,
                      const Rng& rng, MomentumState* momentum) {
  const BatchMetrics m = forward_backward(model, batch, cfg, rng);
  const bool use_momentum = cfg.momentum > 0.0;
  if (use_momentum && !momentum) throw InvalidArgument("sgd_step: momentum > 0 needs a velocity buffer");
  for (auto& p : model.params) {
    auto w = p.value.values();
    auto g = p.grad.values();
    if (use_momentum) {
      auto v = momentum->at(p.index).value.values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double grad = g[i] + cfg.weight_decay * w[i];
        v[i] = cfg.momentum * v[i] + grad;
        w[i] -= lr * v[i];
      }
    } else if (cfg.weight_decay != 0.0) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (g[i] + cfg.weight_decay * w[i]);
    } else {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
  }
  return m;
}

std::string format_epoch_row(const EpochLog& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f", row.epoch, row.lr,
                row.neg_ratio, row.loss_total, row.loss_verif, row.loss_id, row.acc_id,
                row.acc_verif);
  return buf;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, int epochs_completed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "checkpoint_e%04d.idvc", epochs_completed);
  return out_dir / buf;
}

std::vector<Tensor> load_train_images(const Manifest& manifest, const AugmentConfig& augment) {
  std::vector<Tensor> images;
  for (const auto& s : manifest.samples) {
    if (s.split != Split::Train) continue;
    images.push_back(normalize_pixels(load_resized(manifest, s, augment.resize_to), augment));
  }
  return images;
}

TrainAccuracy measure_train_accuracy(const IdvModel& model, std::span<const Tensor> images,
                                     std::span<const Sample> samples, std::span<const PairSpec> pairs,
                                     const AugmentConfig& aug) {
  if (images.size() != samples.size()) throw InvalidArgument("measure_train_accuracy: size mismatch");
  Rng unused(0);
  std::vector<Tensor> crops;
  crops.reserve(images.size());
  for (const auto& img : images) crops.push_back(augment(img, aug, false, unused));

  TrainAccuracy acc;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < crops.size(); ++i) {
    Graph g;
    Var f = embed(g, model, crops[i]);
    Var p = softmax(linear(f, g.param(model.params.get(param_names::kIdentWeight)),
                           g.param(model.params.get(param_names::kIdentBias))));
    hits += argmax(p.value()) == static_cast<std::size_t>(samples[i].label);
  }
  acc.identification = crops.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(crops.size());
  std::size_t vhits = 0;
  for (const auto& pair : pairs) {
    const auto pred = predict_pair(model, crops[pair.anchor], crops[pair.partner]);
    vhits += (pred.q[0] > pred.q[1]) == pair.same;
  }
  acc.verification = pairs.empty() ? 0.0 : static_cast<double>(vhits) / static_cast<double>(pairs.size());
  return acc;
}

TrainResult train(const Manifest& manifest, const RunConfig& config_in, const TrainOptions& options) {
  RunConfig config = config_in;
  config.validate();
  const TrainConfig& tc = config.train;
  const auto train_samples = manifest.subset(Split::Train);
  if (manifest.num_identities() < 2) throw InvalidArgument("train: need at least 2 training identities");
  if (config.model.num_identities == 0) {
    config.model.num_identities = manifest.num_identities();
  } else if (config.model.num_identities != manifest.num_identities()) {
    throw InvalidArgument("train: config num_identities " + std::to_string(config.model.num_identities) +
                          " but manifest has " + std::to_string(manifest.num_identities()));
  }
  const std::string snapshot = snapshot_run_config(config);
  const Rng root(tc.seed);

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  int start_epoch = 0;
  if (options.resume) {
    ckpt = *options.resume;
    if (ckpt.config_text != snapshot) {
      throw InvalidArgument("resume: checkpoint was written with a different configuration");
    }
    if (!(ckpt.rng == root)) throw InvalidArgument("resume: checkpoint rng state does not match seed");
    result.model = model_from_checkpoint(ckpt);
    start_epoch = static_cast<int>(ckpt.epoch);
    if (ckpt.mean_image.empty()) throw FormatError("resume: checkpoint has no mean image");
  } else {
    result.model = init_params(config.model, root.stream("init"));
    ckpt.config_text = snapshot;
    ckpt.rng = root;
    ckpt.mean_image = compute_mean_image(manifest, config.augment.resize_to);
    round_to_storage_precision(ckpt.mean_image);
    if (tc.momentum > 0.0) {
      for (const auto& p : result.model.params) ckpt.momentum.add(p.name, Tensor(p.value.shape(), 0.0));
    }
  }
  IdvModel& model = result.model;
  AugmentConfig augment = config.augment;
  augment.mean_image = ckpt.mean_image;
  MomentumState* momentum = tc.momentum > 0.0 ? &ckpt.momentum : nullptr;

  const std::vector<Tensor> images = load_train_images(manifest, augment);
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);
  std::string csv = std::string(kEpochLogHeader) + "\n";
  if (!options.out_dir.empty() && options.resume && std::filesystem::exists(options.out_dir / "epochs.csv")) {
    csv = read_file(options.out_dir / "epochs.csv");
  }
  log::info("training " + std::to_string(tc.max_epochs) + " epochs from epoch " +
            std::to_string(start_epoch) + ", " + std::to_string(train_samples.size()) +
            " train images, K=" + std::to_string(config.model.num_identities) +
            ", seed=" + std::to_string(tc.seed));

  const int end_epoch = options.stop_after ? std::min(*options.stop_after, tc.max_epochs) : tc.max_epochs;
  for (int e = start_epoch; e < end_epoch; ++e) {
    const Rng epoch_rng = root.stream("epoch").stream(static_cast<std::uint64_t>(e));
    const double lr = lr_at_epoch(tc, e);
    const PairPlan plan = sample_pairs(train_samples, e, tc.batch_size_pairs, epoch_rng.stream("pairs"));
    EpochLog row;
    row.epoch = e;
    row.lr = lr;
    row.neg_ratio = ratio_at_epoch(e);
    std::size_t pairs = 0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const PairBatch batch =
          materialize(plan.batches[b], images, augment, epoch_rng.stream("augment").stream(b));
      const BatchMetrics m = sgd_step(model, batch, tc, lr, epoch_rng.stream("dropout").stream(b), momentum);
      const double w = static_cast<double>(m.pairs);
      row.loss_total += w * m.loss_total;
      row.loss_verif += w * m.loss_verif;
      row.loss_id += w * m.loss_ident;
      row.acc_id += w * m.acc_ident;
      row.acc_verif += w * m.acc_verif;
      pairs += m.pairs;
    }
    const double n = static_cast<double>(std::max<std::size_t>(pairs, 1));
    row.loss_total /= n;
    row.loss_verif /= n;
    row.loss_id /= n;
    row.acc_id /= n;
    row.acc_verif /= n;

    round_to_storage_precision(model.params);
    if (momentum) round_to_storage_precision(*momentum);
    ckpt.epoch = static_cast<std::uint32_t>(e + 1);
    ckpt.loss_history.push_back(row.loss_total);
    ckpt.params = model.params;
    result.log.push_back(row);
    csv += format_epoch_row(row) + "\n";
    if (options.on_epoch) options.on_epoch(row);

    if (!options.out_dir.empty()) {
      write_file_atomic(options.out_dir / "epochs.csv", csv);
      if ((e + 1) % tc.checkpoint_every == 0 || e + 1 == tc.max_epochs) {
        save_checkpoint(ckpt, checkpoint_path(options.out_dir, e + 1));
      }
      if (e + 1 == tc.max_epochs) save_checkpoint(ckpt, options.out_dir / "final.idvc");
    }
  }
  ckpt.params = model.params;
  return result;
}

}  // namespace idv
