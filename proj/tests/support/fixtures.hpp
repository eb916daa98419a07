#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "idv/config.hpp"
#include "idv/model.hpp"
#include "idv/rng.hpp"
#include "idv/tensor.hpp"
#include "idv/toy_dataset.hpp"

namespace idv::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0);

/// Two conv stages on 8x8 inputs; quick enough for per-test training.
ModelConfig tiny_model(std::size_t num_identities, PoolingMode pooling = PoolingMode::FixedFlatten);

/// Desk-scale run settings for the toy set: small backbone on 16x16 crops.
RunConfig fast_run_config(const std::string& manifest, std::uint64_t seed);

/// Toy images rendered at 18x18 so fast_run_config can crop 16.
ToyDatasetConfig small_toy(std::size_t ids, double sigma, std::uint64_t seed);

}  // namespace idv::testing
