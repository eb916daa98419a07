#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "idv/error.hpp"
#include "idv/image.hpp"

using namespace idv;

TEST(Ppm, SinglePixel) {
  std::string bytes = "P6\n1 1\n255\n";
  bytes += static_cast<char>(255);
  bytes += static_cast<char>(0);
  bytes += static_cast<char>(0);
  const Tensor t = decode_ppm(bytes);
  EXPECT_EQ(t, Tensor({3, 1, 1}, std::vector<double>({255, 0, 0})));
}

TEST(Ppm, RoundTripRandomImage) {
  Rng rng(1);
  Tensor img({3, 5, 7}, 0.0);
  for (double& v : img.values()) v = static_cast<double>(rng.uniform_index(256));
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
  idv::testing::TempDir dir("ppm");
  write_ppm(img, dir / "x.ppm");
  EXPECT_EQ(read_ppm(dir / "x.ppm"), img);
}

TEST(Ppm, HeaderCommentsAllowed) {
  std::string bytes = "P6\n# made by hand\n2 1\n255\n";
  bytes += std::string(6, static_cast<char>(10));
  EXPECT_EQ(decode_ppm(bytes), Tensor({3, 1, 2}, 10.0));
}

TEST(Ppm, RejectsBadInput) {
  EXPECT_THROW(decode_ppm("P5\n1 1\n255\nx"), FormatError);
  EXPECT_THROW(decode_ppm("P6\n1 1\n65535\nxxxxxx"), FormatError);
  EXPECT_THROW(decode_ppm("P6\n2 2\n255\nabc"), FormatError);
  EXPECT_THROW(decode_ppm("P6\n2"), FormatError);
  EXPECT_THROW(read_ppm("/nonexistent.ppm"), IoError);
}

TEST(Pgm, MinMaxScaling) {
  const Tensor m({2, 2}, std::vector<double>{-1, 0, 1, 3});
  const Tensor b = minmax_to_byte_range(m);
  EXPECT_EQ(b, Tensor({2, 2}, std::vector<double>({0, 63.75, 127.5, 255})));
  const std::string pgm = encode_pgm(b);
  EXPECT_EQ(pgm.substr(0, 11), "P5\n2 2\n255\n");
  EXPECT_EQ(pgm.size(), 15u);
  EXPECT_EQ(static_cast<unsigned char>(pgm[14]), 255);
  EXPECT_EQ(minmax_to_byte_range(Tensor({2, 2}, 4.0)), Tensor({2, 2}, 0.0));
}

TEST(Resize, CornerAligned) {
  const Tensor img({1, 2, 2}, std::vector<double>{0, 10, 20, 30});
  const Tensor up = resize_bilinear(img, 3, 3);
  EXPECT_EQ(up, Tensor({1, 3, 3}, std::vector<double>({0, 5, 10, 10, 15, 20, 20, 25, 30})));
  EXPECT_EQ(resize_bilinear(img, 2, 2), img);
}

TEST(Crop, CenterAndMirror) {
  Tensor img({1, 4, 4}, 0.0);
  for (std::size_t i = 0; i < 16; ++i) img[i] = static_cast<double>(i);
  EXPECT_EQ(center_crop(img, 2), Tensor({1, 2, 2}, std::vector<double>({5, 6, 9, 10})));
  EXPECT_EQ(crop(img, 0, 2, 2, 2), Tensor({1, 2, 2}, std::vector<double>({2, 3, 6, 7})));
  EXPECT_THROW(crop(img, 3, 0, 2, 2), InvalidArgument);
  const Tensor m = mirror_horizontal(img);
  EXPECT_EQ(m.at(0, 1, 0), 7.0);
  EXPECT_EQ(mirror_horizontal(m), img);
}
