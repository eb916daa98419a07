#include "idv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "idv/error.hpp"
#include "idv/image.hpp"
#include "idv/log.hpp"

namespace idv {

void AugmentConfig::validate() const {
  if (crop_to == 0 || resize_to == 0) throw InvalidArgument("augment: sizes must be positive");
  if (crop_to > resize_to) {
    throw InvalidArgument("augment: crop_to " + std::to_string(crop_to) + " exceeds resize_to " +
                          std::to_string(resize_to));
  }
  if (mirror_prob < 0.0 || mirror_prob > 1.0) throw InvalidArgument("augment: mirror_prob not in [0,1]");
  if (!(pixel_scale > 0.0) || !std::isfinite(pixel_scale)) {
    throw InvalidArgument("augment: pixel_scale must be positive and finite");
  }
  if (!mean_image.empty() && (mean_image.rank() != 3 || mean_image.dim(1) != resize_to ||
                              mean_image.dim(2) != resize_to)) {
    throw InvalidArgument("augment: mean image " + shape_string(mean_image.shape()) +
                          " does not match resize_to " + std::to_string(resize_to));
  }
}

Tensor load_resized(const Manifest& manifest, const Sample& sample, std::size_t resize_to) {
  const auto path = manifest.resolve(sample);
  Tensor raw;
  try {
    raw = read_ppm(path);
  } catch (const Error& e) {
    throw IoError("failed to load sample '" + sample.path + "': " + e.what());
  }
  return resize_bilinear(raw, resize_to, resize_to);
}

Tensor compute_mean_image(std::span<const Tensor> images) {
  if (images.empty()) throw InvalidArgument("compute_mean_image: no images");
  Tensor mean(images.front().shape(), 0.0);
  for (const auto& img : images) add_into(mean, img);
  const double n = static_cast<double>(images.size());
  for (auto& v : mean.values()) v /= n;
  return mean;
}

Tensor compute_mean_image(const Manifest& manifest, std::size_t resize_to) {
  std::vector<Tensor> images;
  for (const auto& s : manifest.samples) {
    if (s.split == Split::Train) images.push_back(load_resized(manifest, s, resize_to));
  }
  if (images.empty()) throw InvalidArgument("compute_mean_image: manifest has no train samples");
  return compute_mean_image(images);
}

Tensor normalize_pixels(Tensor image, const AugmentConfig& cfg) {
  const Tensor& mean = cfg.mean_image;
  if (!mean.empty()) {
    if (image.shape() == mean.shape()) {
      add_into(image, mean, -1.0);
    } else {
      if (image.rank() != 3 || image.dim(0) != mean.dim(0)) {
        throw InvalidArgument("normalize_pixels: image " + shape_string(image.shape()) +
                              " does not match mean image channels " + shape_string(mean.shape()));
      }
      const std::size_t plane = mean.dim(1) * mean.dim(2), out_plane = image.dim(1) * image.dim(2);
      for (std::size_t c = 0; c < mean.dim(0); ++c) {
        double avg = 0.0;
        for (std::size_t i = 0; i < plane; ++i) avg += mean[c * plane + i];
        avg /= static_cast<double>(plane);
        for (std::size_t i = 0; i < out_plane; ++i) image[c * out_plane + i] -= avg;
      }
    }
  }
  if (cfg.pixel_scale != 1.0) {
    for (double& v : image.values()) v *= cfg.pixel_scale;
  }
  return image;
}

Tensor preprocess(const Tensor& raw, const AugmentConfig& cfg) {
  return normalize_pixels(resize_bilinear(raw, cfg.resize_to, cfg.resize_to), cfg);
}

Tensor augment(const Tensor& image, const AugmentConfig& cfg, bool training, Rng& rng) {
  if (image.rank() != 3 || image.dim(1) < cfg.crop_to || image.dim(2) < cfg.crop_to) {
    throw InvalidArgument("augment: image " + shape_string(image.shape()) +
                          " smaller than crop " + std::to_string(cfg.crop_to));
  }
  if (!training) return center_crop(image, cfg.crop_to);
  const std::size_t top = rng.uniform_index(image.dim(1) - cfg.crop_to + 1);
  const std::size_t left = rng.uniform_index(image.dim(2) - cfg.crop_to + 1);
  Tensor out = crop(image, top, left, cfg.crop_to, cfg.crop_to);
  if (rng.bernoulli(cfg.mirror_prob)) out = mirror_horizontal(out);
  return out;
}

double ratio_at_epoch(int epoch) {
  if (epoch < 0) throw InvalidArgument("ratio_at_epoch: negative epoch");
  return std::min(std::pow(1.01, epoch), 4.0);
}

std::size_t PairPlan::num_pairs() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

PairPlan sample_pairs(std::span<const Sample> train, int epoch, std::size_t batch_size_pairs,
                      const Rng& rng) {
  if (batch_size_pairs == 0) throw InvalidArgument("sample_pairs: batch size must be >= 1");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].label < 0) {
      throw InvalidArgument("sample_pairs: sample '" + train[i].path + "' has no train label");
    }
    by_label[train[i].label].push_back(i);
  }
  if (by_label.empty()) throw InvalidArgument("sample_pairs: no training identities");
  if (by_label.size() < 2) throw InvalidArgument("sample_pairs: need at least 2 identities");
  std::vector<int> labels;
  for (const auto& [label, members] : by_label) labels.push_back(label);

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle = rng.stream("shuffle");
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
  }

  const double r = ratio_at_epoch(epoch);
  const double p_negative = r / (1.0 + r);
  Rng partners = rng.stream("partners");
  PairPlan plan;
  std::vector<PairSpec> batch;
  for (std::size_t anchor : order) {
    const int label = train[anchor].label;
    const auto& own = by_label[label];
    bool negative = partners.uniform() < p_negative;
    if (!negative && own.size() < 2) {
      negative = true;
      ++plan.redrawn_positives;
    }
    PairSpec pair;
    pair.anchor = anchor;
    if (negative) {
      std::size_t pick = partners.uniform_index(labels.size() - 1);
      const auto self_pos = static_cast<std::size_t>(
          std::lower_bound(labels.begin(), labels.end(), label) - labels.begin());
      if (pick >= self_pos) ++pick;
      const auto& other = by_label[labels[pick]];
      pair.partner = other[partners.uniform_index(other.size())];
    } else {
      const auto self_pos = static_cast<std::size_t>(
          std::find(own.begin(), own.end(), anchor) - own.begin());
      std::size_t pick = partners.uniform_index(own.size() - 1);
      if (pick >= self_pos) ++pick;
      pair.partner = own[pick];
    }
    pair.t1 = static_cast<std::size_t>(label);
    pair.t2 = static_cast<std::size_t>(train[pair.partner].label);
    pair.same = pair.t1 == pair.t2;
    batch.push_back(pair);
    if (batch.size() == batch_size_pairs) {
      plan.batches.push_back(std::move(batch));
      batch.clear();
    }
  }
  if (!batch.empty()) plan.batches.push_back(std::move(batch));
  if (plan.redrawn_positives > 0) {
    log::warn("epoch " + std::to_string(epoch) + ": " + std::to_string(plan.redrawn_positives) +
              " positive pair(s) redrawn as negatives (identity has a single image)");
  }
  return plan;
}

PairBatch materialize(std::span<const PairSpec> pairs, std::span<const Tensor> images,
                      const AugmentConfig& cfg, const Rng& rng) {
  PairBatch batch;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.anchor >= images.size() || p.partner >= images.size()) {
      throw InvalidArgument("materialize: pair index out of range");
    }
    Rng r1 = rng.stream(2 * i);
    Rng r2 = rng.stream(2 * i + 1);
    batch.images1.push_back(augment(images[p.anchor], cfg, true, r1));
    batch.images2.push_back(augment(images[p.partner], cfg, true, r2));
    batch.t1.push_back(p.t1);
    batch.t2.push_back(p.t2);
    batch.same.push_back(p.same);
  }
  return batch;
}

}  // namespace idv
