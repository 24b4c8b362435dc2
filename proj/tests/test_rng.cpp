#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mirl/rng.hpp"

namespace mirl {
namespace {

TEST(Rng, SplitMixReferenceValue) {
  std::uint64_t state = 0;
  EXPECT_EQ(splitmix64(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(state, 0x9e3779b97f4a7c15ULL);
}

TEST(Rng, XoshiroReferenceSequence) {
  Rng rng(42);
  EXPECT_EQ(rng.next(), 0x15780b2e0c2ec716ULL);
  EXPECT_EQ(rng.next(), 0x6104d9866d113a7eULL);
  EXPECT_EQ(rng.next(), 0xae17533239e499a1ULL);
}

TEST(Rng, UniformUsesTop53Bits) {
  Rng rng(42);
  EXPECT_EQ(rng.uniform(), 0.08386297105988216);
}

TEST(Rng, DerivedStreamSeed) {
  Rng rng = derive_stream(7, Stream::kDemos, 3);
  EXPECT_EQ(rng.next(), 0x45ebfd42f7502c7bULL);
}

TEST(Rng, StreamsDifferByTagAndIndex) {
  Rng a = derive_stream(1, Stream::kRollout);
  Rng b = derive_stream(1, Stream::kMinibatch);
  Rng c = derive_stream(1, Stream::kRollout, 1);
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_NE(x, c.next());
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.index(17), b.index(17));
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(5);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    ASSERT_TRUE(std::isfinite(z));
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Rng, IndexCoversRangeUniformly) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  // 6 degrees of freedom, 99.9% quantile is 22.46.
  EXPECT_LT(chi2, 22.46);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

}  // namespace
}  // namespace mirl
