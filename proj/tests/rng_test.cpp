#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "idv/error.hpp"
#include "idv/rng.hpp"

using idv::Rng;

TEST(Rng, SameSeedSameSequence) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, KnownFirstValuesAreStable) {
  // Frozen so that a change to the generator is caught; checkpoints and
  // datasets depend on this exact stream.
  Rng r(0);
  EXPECT_EQ(r.next_u64(), 12035550249420947055ULL);
  EXPECT_EQ(r.next_u64(), 12935080325729570654ULL);
  EXPECT_EQ(Rng(42).stream("init").next_u64(), 2245399251128957271ULL);
  EXPECT_EQ(Rng(7).uniform(), 0.72150818060497024);
}

TEST(Rng, NamedStreamsIgnorePosition) {
  Rng a(3);
  Rng b(3);
  for (int i = 0; i < 10; ++i) b.next_u64();
  Rng sa = a.stream("dropout");
  Rng sb = b.stream("dropout");
  EXPECT_EQ(sa.next_u64(), sb.next_u64());
  EXPECT_NE(a.stream("x").next_u64(), a.stream("y").next_u64());
  EXPECT_NE(a.stream(std::uint64_t{0}).next_u64(), a.stream(std::uint64_t{1}).next_u64());
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(11);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000.0, 0.5, 0.01);
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng r(5);
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 60000; ++i) ++counts[r.uniform_index(6)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
  EXPECT_THROW(r.uniform_index(0), idv::InvalidArgument);
}

TEST(Rng, NormalMoments) {
  Rng r(9);
  double s = 0.0, s2 = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}

TEST(Rng, StateRoundTrip) {
  Rng r(21);
  r.next_u64();
  r.next_u64();
  Rng copy = Rng::from_state(r.key(), r.counter());
  EXPECT_EQ(copy, r);
  EXPECT_EQ(copy.next_u64(), r.next_u64());
}
