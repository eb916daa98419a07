#include "idv/toy_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <system_error>

#include "idv/error.hpp"
#include "idv/image.hpp"
#include "idv/manifest.hpp"

namespace idv {
namespace {

constexpr std::array<double, 3> kLevels{40.0, 140.0, 240.0};
constexpr std::size_t kPaletteSize = 27;
constexpr std::size_t kCombinations = kPaletteSize * kPaletteSize;
constexpr std::array<double, 3> kSkin{205.0, 170.0, 140.0};

std::array<double, 3> palette_colour(std::size_t i) {
  return {kLevels[i / 9], kLevels[(i / 3) % 3], kLevels[i % 3]};
}

std::string image_name(const char* prefix, std::size_t a, std::size_t b, std::size_t c) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "images/%s%04zu_c%zu_%02zu.ppm", prefix, a, b, c);
  return buf;
}

}  // namespace

void ToyDatasetConfig::validate() const {
  if (num_ids < 2) throw InvalidArgument("toy dataset: num_ids must be >= 2");
  if (num_cams < 2) throw InvalidArgument("toy dataset: num_cams must be >= 2");
  if (images_per_id_per_cam < 1) throw InvalidArgument("toy dataset: need >= 1 image per camera");
  if (image_size < 4) throw InvalidArgument("toy dataset: image_size must be >= 4");
  if (noise_sigma < 0.0) throw InvalidArgument("toy dataset: noise_sigma must be >= 0");
  if (2 * num_ids + num_distractors > kCombinations) {
    throw InvalidArgument("toy dataset: at most " + std::to_string(kCombinations) +
                          " distinct signatures available");
  }
}

std::vector<ToySignature> toy_signatures(std::size_t count, Rng rng) {
  if (count > kCombinations) throw InvalidArgument("toy_signatures: too many signatures requested");
  std::vector<std::size_t> combos(kCombinations);
  for (std::size_t i = 0; i < combos.size(); ++i) combos[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(combos[i], combos[i + rng.uniform_index(combos.size() - i)]);
  }
  std::vector<ToySignature> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({palette_colour(combos[i] / kPaletteSize), palette_colour(combos[i] % kPaletteSize)});
  }
  return out;
}

double camera_offset(std::size_t camera, std::size_t num_cams) {
  if (num_cams < 2) return 0.0;
  return -15.0 + 30.0 * static_cast<double>(camera - 1) / static_cast<double>(num_cams - 1);
}

Tensor render_toy_image(const ToySignature& signature, double brightness, double noise_sigma,
                        std::size_t size, Rng& rng) {
  Tensor img({3, size, size}, 0.0);
  const std::size_t head_end = size / 8;
  const std::size_t shirt_end = (size * 11) / 20;
  for (std::size_t y = 0; y < size; ++y) {
    const auto& colour = y < head_end ? kSkin : (y < shirt_end ? signature.shirt : signature.pants);
    for (std::size_t x = 0; x < size; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double v = colour[c] + brightness;
        if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
        img.at(c, y, x) = std::clamp(std::round(v), 0.0, 255.0);
      }
    }
  }
  return img;
}

std::filesystem::path generate_toy_dataset(const ToyDatasetConfig& config,
                                           const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "images").string() + "': " + ec.message());

  const Rng root(config.seed);
  const auto signatures = toy_signatures(2 * config.num_ids + config.num_distractors,
                                         root.stream("signatures"));
  Manifest manifest;
  manifest.base_dir = out_dir;
  std::ostringstream desc;
  desc << " toy dataset: ids=" << config.num_ids << " per_cam=" << config.images_per_id_per_cam
       << " cams=" << config.num_cams << " sigma=" << config.noise_sigma
       << " size=" << config.image_size << " distractors=" << config.num_distractors
       << " seed=" << config.seed;
  manifest.comments.push_back(desc.str());
  manifest.comments.push_back(" train: identities 0.." + std::to_string(config.num_ids - 1) +
                              ", all cameras");
  manifest.comments.push_back(" test: identities " + std::to_string(config.num_ids) + ".." +
                              std::to_string(2 * config.num_ids - 1) +
                              "; identity j queries from camera 1 + ((j - ids) mod cams), other cameras"
                              " form the gallery");

  for (std::size_t id = 0; id < 2 * config.num_ids; ++id) {
    const bool train = id < config.num_ids;
    const std::size_t query_cam = 1 + (id - config.num_ids) % config.num_cams;
    for (std::size_t cam = 1; cam <= config.num_cams; ++cam) {
      for (std::size_t k = 0; k < config.images_per_id_per_cam; ++k) {
        Rng noise = root.stream("image").stream(id).stream(cam).stream(k);
        const Tensor img = render_toy_image(signatures[id], camera_offset(cam, config.num_cams),
                                            config.noise_sigma, config.image_size, noise);
        Sample s;
        s.path = image_name("id", id, cam, k);
        s.identity = static_cast<int>(id);
        s.camera = static_cast<int>(cam);
        s.split = train ? Split::Train : (cam == query_cam ? Split::Query : Split::Gallery);
        write_ppm(img, out_dir / s.path);
        manifest.samples.push_back(std::move(s));
      }
    }
  }
  for (std::size_t d = 0; d < config.num_distractors; ++d) {
    Rng noise = root.stream("distractor").stream(d);
    const std::size_t cam = 1 + noise.uniform_index(config.num_cams);
    const Tensor img = render_toy_image(signatures[2 * config.num_ids + d],
                                        camera_offset(cam, config.num_cams), config.noise_sigma,
                                        config.image_size, noise);
    Sample s;
    s.path = image_name("distractor", d, cam, 0);
    s.identity = kDistractorIdentity;
    s.camera = static_cast<int>(cam);
    s.split = Split::Gallery;
    s.distractor = true;
    write_ppm(img, out_dir / s.path);
    manifest.samples.push_back(std::move(s));
  }
  const auto path = out_dir / "manifest.csv";
  write_manifest(manifest, path);
  return path;
}

}  // namespace idv
