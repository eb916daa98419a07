#include "fixtures.hpp"

#include <atomic>
#include <system_error>

#include <unistd.h>

namespace idv::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("idv_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Tensor random_tensor(const Shape& shape, Rng& rng, double scale) {
  Tensor t(shape, 0.0);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

ModelConfig tiny_model(std::size_t num_identities, PoolingMode pooling) {
  ModelConfig cfg;
  cfg.input_channels = 3;
  cfg.input_size = 8;
  cfg.backbone = {{4, 3, true}, {6, 3, false}};
  cfg.embedding_dim = 6;
  cfg.num_identities = num_identities;
  cfg.dropout_rate = 0.5;
  cfg.pooling = pooling;
  return cfg;
}

RunConfig fast_run_config(const std::string& manifest, std::uint64_t seed) {
  RunConfig cfg;
  cfg.manifest = manifest;
  cfg.model.backbone = {{8, 3, true}, {16, 3, true}, {32, 3, false}};
  cfg.model.embedding_dim = 32;
  cfg.augment.resize_to = 18;
  cfg.augment.crop_to = 16;
  cfg.model.input_size = 16;
  cfg.train.max_epochs = 60;
  cfg.train.final_lr_epochs = 5;
  cfg.train.base_lr = 0.01;
  cfg.train.final_lr = 0.001;
  cfg.train.momentum = 0.9;
  cfg.train.batch_size_pairs = 16;
  cfg.train.checkpoint_every = 1000;
  cfg.train.seed = seed;
  return cfg;
}

ToyDatasetConfig small_toy(std::size_t ids, double sigma, std::uint64_t seed) {
  ToyDatasetConfig cfg;
  cfg.num_ids = ids;
  cfg.images_per_id_per_cam = 6;
  cfg.num_cams = 2;
  cfg.noise_sigma = sigma;
  cfg.image_size = 18;
  cfg.seed = seed;
  return cfg;
}

}  // namespace idv::testing
