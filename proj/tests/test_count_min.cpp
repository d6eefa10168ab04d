#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "dcm/count_min.hpp"
#include "dcm/error.hpp"

using namespace dcm;

namespace {

FlowKey key(std::uint64_t i) {
  return FlowKey{static_cast<ipv4>(0x0A000000 + i), 0x0A0000FF, static_cast<std::uint16_t>(i * 13), 443, 6};
}

// Zipf(1) flow sizes drawn by inverse transform, independent of the library's trace generator.
std::vector<std::uint64_t> zipf_sizes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& s : out) {
    const double u = 1.0 - static_cast<double>(rng() >> 11) * 0x1p-53;
    s = static_cast<std::uint64_t>(std::min(1e6, std::ceil(1.0 / u)));
  }
  return out;
}

}  // namespace

TEST(CountMin, EmptyQueriesZero) {
  CountMinSketch s(4, 128, 1);
  EXPECT_EQ(s.query(key(1)), 0u);
}

TEST(CountMin, LoneFlowIsExact) {
  CountMinSketch s(4, 128, 1);
  s.increment(key(3), 7);
  EXPECT_EQ(s.query(key(3)), 7u);
}

TEST(CountMin, Geometry) {
  const auto s = CountMinSketch::with_memory(1000, 4, 0);
  EXPECT_EQ(s.width(), 62u);
  EXPECT_EQ(s.memory_bytes(), 992u);
  EXPECT_THROW(CountMinSketch::with_memory(15, 4, 0), error);
  EXPECT_THROW(CountMinSketch(0, 5, 0), error);
  CountMinSketch ok(1, 1, 0);
  EXPECT_THROW(ok.increment(key(1), 0), error);
}

TEST(CountMin, SaturatesAndFlags) {
  CountMinSketch s(2, 4, 0);
  s.increment(key(1), 0xFFFFFFF0u);
  EXPECT_FALSE(s.saturated());
  s.increment(key(1), 0x100);
  EXPECT_TRUE(s.saturated());
  EXPECT_EQ(s.query(key(1)), 0xFFFFFFFFu);
}

TEST(CountMin, NeverUnderestimatesAndMeetsErrorBound) {
  const std::size_t flows = 10000, depth = 4, width = 2000;
  const auto sizes = zipf_sizes(flows, 99);
  CountMinSketch s(depth, width, 5);
  std::unordered_map<FlowKey, std::uint64_t> exact;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < flows; ++i) {
    s.increment(key(i), sizes[i]);
    exact[key(i)] += sizes[i];
    total += sizes[i];
  }
  const double eps_n = std::exp(1.0) * static_cast<double>(total) / static_cast<double>(width);
  std::size_t bad = 0;
  for (const auto& [k, c] : exact) {
    const auto q = s.query(k);
    ASSERT_GE(q, c);
    if (static_cast<double>(q - c) > eps_n) ++bad;
  }
  const double p = std::exp(-static_cast<double>(depth));
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(flows));
  EXPECT_LE(static_cast<double>(bad) / flows, p + 3 * sigma);
}

TEST(CountMin, OrderIndependent) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> stream;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5000; ++i) stream.emplace_back(rng() % 700, 1 + rng() % 5);
  CountMinSketch a(3, 97, 8), b(3, 97, 8);
  for (auto [f, d] : stream) a.increment(key(f), d);
  std::shuffle(stream.begin(), stream.end(), rng);
  for (auto [f, d] : stream) b.increment(key(f), d);
  EXPECT_EQ(a, b);
  for (std::uint64_t f = 0; f < 700; ++f) EXPECT_EQ(a.query(key(f)), b.query(key(f)));
}

TEST(CountMin, AccuracyDegradesWithLoad) {
  // Feed flows one after another into a fixed-size sketch; the mean overestimate ratio of the first
  // flows can only grow as more traffic lands in the sketch.
  const auto sizes = zipf_sizes(20000, 4);
  CountMinSketch s(4, 256, 2);
  const std::size_t watched = 200;
  double prev = -1;
  std::size_t fed = 0;
  for (std::size_t prefix : {200u, 1000u, 5000u, 20000u}) {
    for (; fed < prefix; ++fed) s.increment(key(fed), sizes[fed]);
    double sum = 0;
    for (std::size_t i = 0; i < watched; ++i) {
      const double t = static_cast<double>(sizes[i]);
      sum += (static_cast<double>(s.query(key(i))) - t) / t;
    }
    const double ratio = sum / watched;
    EXPECT_GE(ratio, prev);
    prev = ratio;
  }
  EXPECT_GT(prev, 0.0);
}
