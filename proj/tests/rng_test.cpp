#include "alphadogs/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <vector>

namespace {

using adogs::RngStream;

TEST(RngStream, DeterministicPerSeedAndStream) {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DistinctStreamsDiffer) {
  RngStream a(42, 0);
  RngStream b(42, 1);
  RngStream c(43, 0);
  int equal_ab = 0, equal_ac = 0;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va == b.next_u64()) ++equal_ab;
    if (va == c.next_u64()) ++equal_ac;
  }
  EXPECT_EQ(equal_ab, 0);
  EXPECT_EQ(equal_ac, 0);
}

TEST(RngStream, RestoreResumesMidSequence) {
  RngStream a(9001, 3);
  for (int i = 0; i < 17; ++i) a.uniform01();
  RngStream b = RngStream::restore(a.key(), a.counter());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, Uniform01StaysInsideOpenInterval) {
  RngStream r(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform01();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RngStream, UniformMoments) {
  RngStream r(5, 2);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform01();
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.5, 0.005);
  EXPECT_NEAR(var, 1.0 / 12.0, 0.005);
}

TEST(RngStream, NormalMomentsAndCounterUse) {
  RngStream r(5, 4);
  const std::uint64_t c0 = r.counter();
  const double first = r.normal(0.0, 1.0);
  EXPECT_EQ(r.counter(), c0 + 2);  // Box-Muller burns two words
  const int n = 200000;
  double sum = first, sum2 = first * first;
  for (int i = 1; i < n; ++i) {
    const double z = r.normal(0.0, 1.0);
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(RngStream, NormalScalesByMeanAndStddev) {
  RngStream a(11, 0);
  RngStream b(11, 0);
  for (int i = 0; i < 100; ++i) {
    const double z = a.normal(0.0, 1.0);
    const double s = b.normal(2.0, 3.0);
    EXPECT_NEAR(s, 2.0 + 3.0 * z, 1e-12);
  }
}

}  // namespace
