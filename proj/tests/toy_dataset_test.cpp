#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "idv/descriptors.hpp"
#include "idv/error.hpp"
#include "idv/evaluate.hpp"
#include "idv/file_util.hpp"
#include "idv/image.hpp"
#include "idv/manifest.hpp"
#include "idv/toy_dataset.hpp"

using namespace idv;

TEST(ToyDataset, LayoutAndSplits) {
  idv::testing::TempDir dir("toy");
  ToyDatasetConfig cfg = idv::testing::small_toy(4, 2.0, 1);
  cfg.num_distractors = 3;
  const auto path = generate_toy_dataset(cfg, dir.path());
  const Manifest m = load_manifest(path);
  EXPECT_EQ(m.num_identities(), 4u);
  EXPECT_EQ(m.subset(Split::Train).size(), 4u * 6 * 2);
  EXPECT_EQ(m.subset(Split::Query).size(), 4u * 6);
  EXPECT_EQ(m.subset(Split::Gallery).size(), 4u * 6 + 3);
  EXPECT_FALSE(m.comments.empty());
  for (const auto& s : m.subset(Split::Query)) EXPECT_GE(s.identity, 4);
  std::size_t distractors = 0;
  for (const auto& s : m.subset(Split::Gallery)) distractors += s.distractor;
  EXPECT_EQ(distractors, 3u);
  const Tensor img = read_ppm(m.resolve(m.samples.front()));
  EXPECT_EQ(img.shape(), (Shape{3, 18, 18}));
}

TEST(ToyDataset, NoiselessImagesRepeatPerCamera) {
  idv::testing::TempDir dir("toy0");
  const auto path = generate_toy_dataset(idv::testing::small_toy(3, 0.0, 2), dir.path());
  const Manifest m = load_manifest(path);
  std::map<std::pair<int, int>, Tensor> seen;
  for (const auto& s : m.samples) {
    const Tensor img = read_ppm(m.resolve(s));
    auto [it, inserted] = seen.emplace(std::pair{s.identity, s.camera}, img);
    if (!inserted) EXPECT_EQ(it->second, img) << s.path;
  }
}

TEST(ToyDataset, SameSeedSameBytes) {
  idv::testing::TempDir a("toya"), b("toyb");
  const auto cfg = idv::testing::small_toy(3, 3.0, 5);
  generate_toy_dataset(cfg, a.path());
  generate_toy_dataset(cfg, b.path());
  const Manifest m = load_manifest(a / "manifest.csv");
  EXPECT_EQ(read_file(a / "manifest.csv"), read_file(b / "manifest.csv"));
  for (const auto& s : m.samples) EXPECT_EQ(read_file(a / s.path), read_file(b / s.path)) << s.path;
}

TEST(ToyDataset, RawPixelNearestNeighbourIsPerfectWithoutNoise) {
  idv::testing::TempDir dir("toynn");
  const auto path = generate_toy_dataset(idv::testing::small_toy(6, 0.0, 3), dir.path());
  const Manifest m = load_manifest(path);
  auto pixels = [&](Split split) {
    DescriptorSet set;
    for (const auto& s : m.subset(split)) {
      const Tensor img = read_ppm(m.resolve(s));
      set.dim = img.size();
      set.data.insert(set.data.end(), img.values().begin(), img.values().end());
      set.samples.push_back(s);
    }
    return set;
  };
  // Brute force over raw pixels: each query's nearest gallery image by
  // Euclidean distance must share its identity.
  const DescriptorSet q = pixels(Split::Query), g = pixels(Split::Gallery);
  for (std::size_t i = 0; i < q.size(); ++i) {
    double best = 1e300;
    int best_id = -2;
    for (std::size_t j = 0; j < g.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < q.dim; ++k) d += (q.row(i)[k] - g.row(j)[k]) * (q.row(i)[k] - g.row(j)[k]);
      if (d < best) {
        best = d;
        best_id = g.samples[j].identity;
      }
    }
    EXPECT_EQ(best_id, q.samples[i].identity);
  }
}

TEST(ToyDataset, Validation) {
  ToyDatasetConfig cfg;
  cfg.num_ids = 1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.num_cams = 1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.noise_sigma = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(ToyDataset, UnwritableDirectory) {
  idv::testing::TempDir dir("toyro");
  write_file_atomic(dir / "file", "x");
  EXPECT_THROW(generate_toy_dataset(idv::testing::small_toy(2, 0.0, 1), dir / "file" / "sub"), Error);
}

TEST(ToyDataset, CameraOffsetsSpanRange) {
  EXPECT_DOUBLE_EQ(camera_offset(1, 2), -15.0);
  EXPECT_DOUBLE_EQ(camera_offset(2, 2), 15.0);
  EXPECT_DOUBLE_EQ(camera_offset(2, 3), 0.0);
}
