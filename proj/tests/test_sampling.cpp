#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dcm/actions.hpp"
#include "dcm/error.hpp"
#include "dcm/sampling.hpp"

using namespace dcm;

namespace {

const FlowKey flow{0x0A000001, 0x0A000002, 1234, 80, 6};

}  // namespace

TEST(Sampling, ElevenSixteenthsExpansion) {
  EXPECT_EQ(rate_to_actions(SampleRate(11, 4)), (std::vector<unsigned>{1, 3, 4}));
  EXPECT_EQ(rate_to_actions(SampleRate(1, 1)), (std::vector<unsigned>{1}));
  EXPECT_EQ(rate_to_actions(SampleRate(255, 8)), (std::vector<unsigned>{1, 2, 3, 4, 5, 6, 7, 8}));
}

TEST(Sampling, ExpansionIsExactAtEveryPrecision) {
  for (unsigned bits : {6u, 8u, 10u}) {
    for (std::uint64_t num = 1; num < (std::uint64_t{1} << bits); ++num) {
      // Integer form of sum 2^-b: each b contributes 2^(bits-b) units of 2^-bits.
      std::uint64_t units = 0;
      for (unsigned b : rate_to_actions(SampleRate(num, bits))) {
        ASSERT_GE(b, 1u);
        ASSERT_LE(b, bits);
        units += std::uint64_t{1} << (bits - b);
      }
      ASSERT_EQ(units, num);
    }
  }
}

TEST(Sampling, RateValidation) {
  EXPECT_THROW(SampleRate(0, 4), error);
  EXPECT_THROW(SampleRate(16, 4), error);
  EXPECT_THROW(SampleRate(1, 0), error);
  EXPECT_THROW(SampleRate(1, 33), error);
  EXPECT_EQ(SampleRate::rounded(0.3, 4), SampleRate(5, 4));
  EXPECT_EQ(SampleRate::rounded(0.0, 4), SampleRate(1, 4));
  EXPECT_EQ(SampleRate::rounded(1.0, 4), SampleRate(15, 4));
}

TEST(Sampling, Intervals) {
  EXPECT_EQ(action_interval(1).lo, 0.5);
  EXPECT_EQ(action_interval(1).hi, 1.0);
  EXPECT_EQ(action_interval(2).lo, 0.25);
  EXPECT_EQ(action_interval(2).hi, 0.5);
  EXPECT_THROW(action_interval(0), error);
  // Dyadic partition of [2^-32, 1): consecutive intervals abut and never overlap.
  for (unsigned i = 1; i < 32; ++i) EXPECT_EQ(action_interval(i + 1).hi, action_interval(i).lo);
  EXPECT_EQ(action_interval(32).lo, std::ldexp(1.0, -32));
  EXPECT_TRUE(should_sample(1, 0.5));
  EXPECT_FALSE(should_sample(1, 0.4999));
  EXPECT_FALSE(should_sample(2, 0.5));
}

TEST(Sampling, AtMostOneIntervalPerHash) {
  for (std::uint32_t o = 0; o < 20000; ++o) {
    const double h = packet_hash(PacketId{flow, o}, 3);
    int hits = 0;
    for (unsigned i = 1; i <= 32; ++i) hits += should_sample(i, h);
    ASSERT_LE(hits, 1);
  }
}

TEST(Sampling, PacketHashIsUniform) {
  // One-sample Kolmogorov-Smirnov against U[0,1); 1.63/sqrt(n) is the 1% critical value.
  const std::size_t n = 20000;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = packet_hash(PacketId{flow, static_cast<std::uint32_t>(i)}, 17);
  std::sort(v.begin(), v.end());
  double d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d = std::max(d, std::abs(v[i] - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - v[i]));
  }
  EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(n)));
  EXPECT_GE(v.front(), 0.0);
  EXPECT_LT(v.back(), 1.0);
}

TEST(Sampling, PacketHashIsKeyedAndDeterministic) {
  EXPECT_EQ(packet_hash(PacketId{flow, 5}, 1), packet_hash(PacketId{flow, 5}, 1));
  EXPECT_NE(packet_hash(PacketId{flow, 5}, 1), packet_hash(PacketId{flow, 5}, 2));
  EXPECT_NE(packet_hash(PacketId{flow, 5}, 1), packet_hash(PacketId{flow, 6}, 1));
}

TEST(Sampling, EmpiricalRateWithinFourSigma) {
  const SampleRate r(11, 4);
  const auto bits = rate_to_actions(r);
  const std::size_t packets = 100000;
  std::size_t sampled = 0;
  for (std::uint32_t o = 0; o < packets; ++o) {
    const double h = packet_hash(PacketId{flow, o}, 77);
    for (unsigned b : bits) sampled += should_sample(b, h);
  }
  const double p = r.value();
  const double sigma = std::sqrt(p * (1 - p) / packets);
  EXPECT_NEAR(static_cast<double>(sampled) / packets, 0.6875, 4 * sigma);
}

TEST(Actions, CatalogLookup) {
  const auto c = ActionCatalog::with_fixed_rate(SampleRate(3, 2));
  EXPECT_EQ(c.at(count_action).kind, ActionKind::count);
  EXPECT_EQ(c.at(ActionId{4}).interval, 4u);
  EXPECT_TRUE(c.at(fixed_rate_action).selects(0.74));
  EXPECT_FALSE(c.at(fixed_rate_action).selects(0.75));
  EXPECT_THROW((void)c.at(ActionId{77}), error);
  EXPECT_THROW(interval_action(33), error);
}
