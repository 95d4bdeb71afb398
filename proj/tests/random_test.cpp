#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "sparseobs/random.hpp"

namespace sparseobs {
namespace {

// Known-answer vectors published with Random123.
TEST(Philox, KnownAnswerVectors) {
  using Block = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RandomStream, SameSeedAndStreamReproduce) {
  RandomStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    differs_stream |= va != c.next_u64();
    differs_seed |= va != d.next_u64();
  }
  EXPECT_TRUE(differs_stream);
  EXPECT_TRUE(differs_seed);
}

TEST(RandomStream, UniformAndNormalMoments) {
  RandomStream rng(7, 0);
  constexpr int kN = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < kN; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / kN, 0.5, 0.005);
  EXPECT_NEAR(sn / kN, 0.0, 0.01);
  EXPECT_NEAR(sn2 / kN, 1.0, 0.02);
}

TEST(RandomStream, SubsetIsSortedDistinctAndInRange) {
  RandomStream rng(1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = rng.subset(10, 4);
    ASSERT_EQ(s.size(), 4u);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), 4u);
    EXPECT_GE(s.front(), 0);
    EXPECT_LT(s.back(), 10);
  }
}

TEST(RandomStream, SubsetCoversIndicesUniformly) {
  RandomStream rng(2, 0);
  std::array<int, 6> counts{};
  constexpr int kN = 60000;
  for (int i = 0; i < kN; ++i) {
    for (int j : rng.subset(6, 2)) ++counts[static_cast<std::size_t>(j)];
  }
  for (int c : counts) EXPECT_NEAR(c / double(kN), 2.0 / 6.0, 0.01);
}

TEST(DeriveSeed, DistinctIndicesGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(99, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(5, 17), derive_seed(5, 17));
}

}  // namespace
}  // namespace sparseobs
