#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "kickwave/rng.hpp"

using kickwave::CellStream;
using kickwave::Philox4x32;

// Known-answer vectors published with the Random123 library.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
            (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CellStream, ReplaysIndependentlyOfOtherStreams) {
  CellStream a(42, 3, -7);
  const double a0 = a.uniform(), a1 = a.uniform(), a2 = a.uniform();
  CellStream other(42, 3, -6);
  for (int k = 0; k < 10; ++k) other.uniform();
  CellStream b(42, 3, -7);
  EXPECT_EQ(b.uniform(), a0);
  EXPECT_EQ(b.uniform(), a1);
  EXPECT_EQ(b.uniform(), a2);
}

TEST(CellStream, DistinctKeysGiveDistinctStreams) {
  std::set<double> firsts;
  for (std::int64_t n = -3; n <= 3; ++n)
    for (std::int64_t i = -3; i <= 3; ++i) firsts.insert(CellStream(1, n, i).uniform());
  EXPECT_EQ(firsts.size(), 49u);
  EXPECT_NE(CellStream(1, 0, 0).uniform(), CellStream(2, 0, 0).uniform());
}

TEST(CellStream, UniformMoments) {
  CellStream s(7, 0, 0);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sq / n, 1.0 / 3.0, 0.005);
}

TEST(CellStream, RejectsTimesOutsideInt32) {
  EXPECT_THROW(CellStream(0, std::int64_t{1} << 40, 0), std::out_of_range);
}
