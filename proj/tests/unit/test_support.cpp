#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include <cellscope/error.hpp>
#include <cellscope/image.hpp>
#include <cellscope/parallel.hpp>
#include <cellscope/random.hpp>

using namespace cellscope;

TEST(Rng, SameSeedSameStream) {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_EQ(a.normal(0, 1), b.normal(0, 1));
    EXPECT_EQ(a.poisson(3.5), b.poisson(3.5));
  }
}

TEST(Rng, DistributionMoments) {
  Rng rng(7);
  const int n = 200000;
  double su = 0;
  double sn = 0;
  double sn2 = 0;
  double sp = 0;
  std::vector<int> below(5, 0);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal(2.0, 3.0);
    sn += z;
    sn2 += (z - 2.0) * (z - 2.0);
    sp += static_cast<double>(rng.poisson(0.7));
    ++below[rng.below(5)];
  }
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 2.0, 5 * 3.0 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 9.0, 0.1);
  EXPECT_NEAR(sp / n, 0.7, 5 * std::sqrt(0.7 / n));
  for (int c : below) EXPECT_NEAR(c, n / 5.0, 5 * std::sqrt(n * 0.16));
}

TEST(Rng, PoissonLargeMean) {
  Rng rng(3);
  double s = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) s += static_cast<double>(rng.poisson(60.0));
  EXPECT_NEAR(s / n, 60.0, 5 * std::sqrt(60.0 / n));
}

TEST(Seeds, MixAndHashAreStableAndSpread) {
  EXPECT_EQ(mix_seed(1, 2), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(mix_seed(5, i));
  EXPECT_EQ(seen.size(), 1000u);
  // FNV-1a reference values.
  EXPECT_EQ(hash_string(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(hash_string("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Parallel, EverySlotOnceRegardlessOfWorkers) {
  for (int workers : {1, 2, 8, 64}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1);
  }
  std::atomic<int> calls{0};
  parallel_for(0, 4, [&](std::size_t) { ++calls; });
  EXPECT_EQ(calls.load(), 0);
}

TEST(Parallel, RethrowsTheSmallestFailingIndex) {
  for (int workers : {1, 4}) {
    try {
      parallel_for(100, workers, [](std::size_t i) {
        if (i % 10 == 7) throw std::runtime_error(std::to_string(i));
      });
      FAIL();
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "7");
    }
  }
}

TEST(Image, ConstructionAndCrop) {
  EXPECT_THROW(GrayImage(3, 3, std::vector<std::uint8_t>(8)), InputError);
  GrayImage img(5, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 5; ++x) img.at(x, y) = static_cast<std::uint8_t>(10 * y + x);
  }
  const auto c = img.crop(1, 2, 3, 2);
  EXPECT_EQ(c.width(), 3u);
  EXPECT_EQ(c.at(0, 0), 21);
  EXPECT_EQ(c.at(2, 1), 33);
  EXPECT_ANY_THROW(img.crop(4, 0, 3, 1));
  const RgbImage rgb(img);
  EXPECT_EQ(rgb.at(4, 3), (RgbImage::Pixel{34, 34, 34}));
}
