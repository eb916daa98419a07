#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "idv/error.hpp"
#include "idv/tensor.hpp"

using idv::Tensor;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), idv::InvalidArgument);
  EXPECT_THROW(Tensor({2, 0}), idv::InvalidArgument);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(idv::shape_string(t.shape()), "[2,3]");
}

TEST(Tensor, RowMajorAccess) {
  Tensor t({2, 2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  EXPECT_EQ(t.at(1, 0, 2), 8.0);
  EXPECT_EQ(t.at(0, 1, 0), 3.0);
}

TEST(Tensor, ReshapeKeepsValues) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (idv::Shape{3, 2}));
  EXPECT_EQ(r[5], 6.0);
  EXPECT_THROW(t.reshaped({4}), idv::InvalidArgument);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, AddIntoScales) {
  Tensor a({2}, std::vector<double>{1, 2});
  Tensor b({2}, std::vector<double>{10, 20});
  idv::add_into(a, b, -0.5);
  EXPECT_EQ(a, Tensor({2}, std::vector<double>({-4, -8})));
  EXPECT_THROW(idv::add_into(a, Tensor({3}, 0.0)), idv::InvalidArgument);
  EXPECT_DOUBLE_EQ(idv::max_abs_diff(a, Tensor({2}, std::vector<double>{-4, -7})), 1.0);
}
