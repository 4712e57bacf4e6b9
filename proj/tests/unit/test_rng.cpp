#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rwre/rng.hpp"

using namespace rwre;

TEST(Philox, KnownAnswerZero) {
  const Counter out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  const Counter out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPiDigits) {
  const Counter out =
      philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(CounterStream, Reproducible) {
  CounterStream a(42, StreamTag::walk, 7);
  CounterStream b(42, StreamTag::walk, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
  EXPECT_EQ(a.position(), 1000u);
}

TEST(CounterStream, DistinctStreamsDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint64_t id = 0; id < 100; ++id) first.insert(CounterStream(1, StreamTag::walk, id)());
  for (std::uint32_t lane = 1; lane < 50; ++lane) first.insert(CounterStream(1, StreamTag::walk, 0, lane)());
  first.insert(CounterStream(1, StreamTag::site_p, 0)());
  first.insert(CounterStream(2, StreamTag::walk, 0)());
  EXPECT_EQ(first.size(), 151u);
}

TEST(CounterStream, UniformMeanAndRange) {
  CounterStream s(9, StreamTag::synthetic, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(DeriveSeed, StableAndSpread) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}
