#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idv/checkpoint.hpp"
#include "idv/config.hpp"
#include "idv/manifest.hpp"
#include "idv/model.hpp"
#include "idv/pipeline.hpp"
#include "idv/train_config.hpp"

namespace idv {

/// Learning rate for 0-based epoch `epoch`: base_lr, then final_lr for the
/// last final_lr_epochs epochs.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

struct BatchMetrics {
  std::size_t pairs = 0;
  double loss_total = 0.0;  // mean over pairs of the weighted objective
  double loss_verif = 0.0;  // mean verification (or contrastive) loss
  double loss_ident = 0.0;  // mean of the two identification losses
  double acc_ident = 0.0;   // fraction of the 2*pairs images classified correctly
  double acc_verif = 0.0;   // fraction of pairs with the right same/different call
};

/// Velocity buffers for momentum SGD, aligned with the model's ParamStore.
using MomentumState = ParamStore;

/// One mini-batch update: zero grads, forward every pair (training mode),
/// back-propagate the mean pair objective, then w <- w - lr * (grad + wd*w)
/// (with a velocity buffer when momentum > 0). Per-pair gradients are
/// reduced in ascending pair index, so the update does not depend on
/// cfg.workers. Throws NumericError naming the first non-finite op.
BatchMetrics sgd_step(IdvModel& model, const PairBatch& batch, const TrainConfig& cfg, double lr,
                      const Rng& rng, MomentumState* momentum = nullptr);

/// Same forward/backward as sgd_step but leaves gradients in
/// model.params[*].grad without updating; returns the metrics.
BatchMetrics accumulate_batch_gradients(IdvModel& model, const PairBatch& batch,
                                        const TrainConfig& cfg, const Rng& rng);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double neg_ratio = 0.0;
  double loss_total = 0.0;
  double loss_verif = 0.0;
  double loss_id = 0.0;
  double acc_id = 0.0;
  double acc_verif = 0.0;
};

inline constexpr const char* kEpochLogHeader =
    "epoch,lr,neg_ratio,loss_total,loss_verif,loss_id,acc_id,acc_verif";
std::string format_epoch_row(const EpochLog& row);

struct TrainOptions {
  /// Where checkpoints and epochs.csv go; empty keeps everything in memory.
  std::filesystem::path out_dir;
  /// Continue from this state instead of initializing from the seed.
  std::optional<Checkpoint> resume;
  /// Stop after this many completed epochs (simulates an interrupted run).
  std::optional<int> stop_after;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  IdvModel model;
  std::vector<EpochLog> log;
};

/// Runs epochs of sample_pairs -> augment -> sgd_step. All randomness comes
/// from named streams of the seed, and parameters are rounded to checkpoint
/// precision at every epoch boundary, so a resumed run matches an
/// uninterrupted one bit for bit.
TrainResult train(const Manifest& manifest, const RunConfig& config, const TrainOptions& options = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, int epochs_completed);

/// Eval-mode accuracy on the training identities: identity accuracy over
/// all train images (centre crop) and verification accuracy over the given
/// pairs.
struct TrainAccuracy {
  double identification = 0.0;
  double verification = 0.0;
};
TrainAccuracy measure_train_accuracy(const IdvModel& model, std::span<const Tensor> images,
                                     std::span<const Sample> samples, std::span<const PairSpec> pairs,
                                     const AugmentConfig& augment);

/// Train samples decoded, resized and normalized, aligned with
/// manifest.subset(Split::Train).
std::vector<Tensor> load_train_images(const Manifest& manifest, const AugmentConfig& augment);

}  // namespace idv
