#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "idv/rng.hpp"
#include "idv/tensor.hpp"

namespace idv {

/// Synthetic pedestrians: a head band, a "shirt" colour and a "pants"
/// colour. Colour is the identity signal; each camera adds a fixed
/// brightness offset and i.i.d. Gaussian pixel noise.
struct ToyDatasetConfig {
  std::size_t num_ids = 8;                 // identities per split group
  std::size_t images_per_id_per_cam = 6;
  std::size_t num_cams = 2;
  double noise_sigma = 2.0;
  std::size_t image_size = 36;
  std::size_t num_distractors = 0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct ToySignature {
  std::array<double, 3> shirt{};
  std::array<double, 3> pants{};
};

/// `count` distinct signatures drawn from a 27-colour palette without
/// replacement over (shirt, pants) combinations.
std::vector<ToySignature> toy_signatures(std::size_t count, Rng rng);

/// Brightness offset of 1-based `camera`, evenly spread over [-15, 15].
double camera_offset(std::size_t camera, std::size_t num_cams);

/// Renders one [3,size,size] image with values rounded to integers in
/// [0, 255] (what a P6 round trip would produce).
Tensor render_toy_image(const ToySignature& signature, double brightness, double noise_sigma,
                        std::size_t size, Rng& rng);

/// Writes images and `manifest.csv` under `out_dir` and returns the manifest
/// path. Identities 0..num_ids-1 form the train split; identities
/// num_ids..2*num_ids-1 are held out: identity j's images from camera
/// 1 + ((j - num_ids) mod num_cams) are queries, its other cameras' images are gallery.
/// Distractors are gallery images with unseen signatures.
std::filesystem::path generate_toy_dataset(const ToyDatasetConfig& config,
                                           const std::filesystem::path& out_dir);

}  // namespace idv
