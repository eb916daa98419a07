#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "idv/manifest.hpp"
#include "idv/rng.hpp"
#include "idv/tensor.hpp"

namespace idv {

struct AugmentConfig {
  std::size_t resize_to = 36;
  std::size_t crop_to = 32;
  double mirror_prob = 0.5;
  /// Multiplies mean-subtracted pixel values (0..255 range) before they
  /// reach the network.
  double pixel_scale = 1.0 / 255.0;
  /// [C, resize_to, resize_to]; empty until computed from the train split.
  Tensor mean_image;

  void validate() const;
};

/// Decodes a sample and resizes it to resize_to x resize_to.
Tensor load_resized(const Manifest& manifest, const Sample& sample, std::size_t resize_to);

/// Per-pixel, per-channel arithmetic mean.
Tensor compute_mean_image(std::span<const Tensor> images);
/// Mean over all train samples of `manifest`, each resized to `resize_to`.
Tensor compute_mean_image(const Manifest& manifest, std::size_t resize_to);

/// Subtracts cfg.mean_image and multiplies by cfg.pixel_scale. Images whose
/// spatial size differs from the mean image (variable-size MAC inputs) get
/// the per-channel average of the mean image subtracted instead.
Tensor normalize_pixels(Tensor image, const AugmentConfig& cfg);

/// Resize to cfg.resize_to, then normalize_pixels.
Tensor preprocess(const Tensor& raw, const AugmentConfig& cfg);

/// Training: uniform random crop to crop_to, then a horizontal mirror with
/// probability mirror_prob. Eval: centre crop, no mirror, no rng use.
Tensor augment(const Tensor& image, const AugmentConfig& cfg, bool training, Rng& rng);

/// Negative:positive ratio used at `epoch`: min(1.01^epoch, 4).
double ratio_at_epoch(int epoch);

struct PairSpec {
  std::size_t anchor = 0;   // index into the train sample list
  std::size_t partner = 0;  // index into the train sample list
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  bool same = false;
};

struct PairPlan {
  std::vector<std::vector<PairSpec>> batches;
  /// Positives requested for identities with a single image, drawn as
  /// negatives instead.
  std::size_t redrawn_positives = 0;

  std::size_t num_pairs() const;
};

/// One epoch of pairs. Anchors are a shuffled pass over `train`; each
/// anchor gets a negative partner with probability r/(1+r) for
/// r = ratio_at_epoch(epoch), otherwise a positive one. The last batch may
/// be short.
PairPlan sample_pairs(std::span<const Sample> train, int epoch, std::size_t batch_size_pairs,
                      const Rng& rng);

struct PairBatch {
  std::vector<Tensor> images1;
  std::vector<Tensor> images2;
  std::vector<std::size_t> t1;
  std::vector<std::size_t> t2;
  std::vector<bool> same;

  std::size_t size() const { return same.size(); }
};

/// Augments both images of every pair. `images` are preprocessed train
/// images aligned with the sample list `pairs` index into. Each pair draws
/// from its own stream of `rng`, so the result is independent of how the
/// work is scheduled.
PairBatch materialize(std::span<const PairSpec> pairs, std::span<const Tensor> images,
                      const AugmentConfig& cfg, const Rng& rng);

}  // namespace idv
