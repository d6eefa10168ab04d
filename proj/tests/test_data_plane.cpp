#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "dcm/actions.hpp"
#include "dcm/data_plane.hpp"
#include "dcm/error.hpp"

using namespace dcm;

namespace {

CatalogPtr catalog() { return std::make_shared<const ActionCatalog>(ActionCatalog::standard()); }

FlowKey key(std::uint32_t i) { return FlowKey{0x0A000000 + i, 0x0A000100 + i, static_cast<std::uint16_t>(1000 + i), 80, 6}; }

SwitchConfig config() {
  SwitchConfig c;
  c.sketch_bytes = 4096;
  c.seed = 3;
  c.packet_hash_seed = 4;
  return c;
}

TwoStageFilter filter_with(std::initializer_list<std::pair<FlowKey, std::vector<ActionId>>> members) {
  TwoStageFilter t(BloomFilter::sized_for(100, 1e-4, 1));
  std::vector<ActionId> seen;
  for (const auto& [f, acts] : members) {
    for (ActionId a : acts) {
      if (!t.has_action(a)) t.add_action(a, 2000, 5, 10 + a.value);
    }
  }
  for (const auto& [f, acts] : members) t.insert(f, std::span<const ActionId>(acts));
  return t;
}

}  // namespace

TEST(IpPrefix, Matching) {
  EXPECT_TRUE((IpPrefix{0x0A000000, 8}.matches(0x0A123456)));
  EXPECT_FALSE((IpPrefix{0x0A000000, 8}.matches(0x0B000000)));
  EXPECT_TRUE((IpPrefix{0, 0}.matches(0xFFFFFFFF)));
  EXPECT_EQ((IpPrefix{0, 30}.mask()), 0xFFFFFFFCu);
  EXPECT_EQ((IpPrefix{0, 32}.mask()), 0xFFFFFFFFu);
}

TEST(SwitchState, UnknownFlowProducesNothing) {
  SwitchState s(1, config(), catalog());
  s.install(filter_with({{key(1), {count_action}}}), {});
  const auto ev = s.process_packet(PacketId{key(2), 0});
  EXPECT_TRUE(ev.empty());
  EXPECT_EQ(s.stats().adm_lookups, 1u);
}

TEST(SwitchState, CountingFlowCountsEveryPacket) {
  SwitchState s(1, config(), catalog());
  s.install(filter_with({{key(1), {count_action}}}), {});
  std::size_t events = 0;
  s.process_packets(key(1), 0, 250, [&](const MonitorEvent& e) {
    EXPECT_EQ(e.kind, EventKind::counted);
    ++events;
  });
  EXPECT_EQ(events, 250u);
  EXPECT_GE(s.sketch(count_action)->query(key(1)), 250u);
}

TEST(SwitchState, MultiRateSamplingFraction) {
  SwitchState s(1, config(), catalog());
  s.install(filter_with({{key(1), {ActionId{1}, ActionId{3}, ActionId{4}}}}), {});
  const std::uint32_t packets = 100000;
  std::size_t sampled = 0;
  s.process_packets(key(1), 0, packets, [&](const MonitorEvent& e) { sampled += e.kind == EventKind::sampled; });
  const double sigma = std::sqrt(0.6875 * 0.3125 / packets);
  EXPECT_NEAR(static_cast<double>(sampled) / packets, 0.6875, 4 * sigma);
  EXPECT_EQ(s.buffered_samples(), sampled);
}

TEST(SwitchState, EmptyAdmissionMeansNoActionLookups) {
  SwitchState s(1, config(), catalog());
  TwoStageFilter t(BloomFilter(1024, 3, 1));
  t.add_action(count_action, 1024, 3, 2);
  t.add_action(ActionId{1}, 1024, 3, 3);
  s.install(t, {});
  for (std::uint32_t i = 0; i < 500; ++i) s.process_packets(key(i), 0, 3, [](const MonitorEvent&) {});
  EXPECT_EQ(s.stats().actbf_lookups, 0u);
  EXPECT_EQ(s.stats().adm_hits, 0u);
  EXPECT_EQ(s.stats().packets, 1500u);
}

TEST(SwitchState, WildcardRuleBypassesFilters) {
  SwitchState s(1, config(), catalog());
  WildcardRule r = match_all_rule(count_action);
  r.src = IpPrefix{0x0A000000, 24};
  s.install(filter_with({{key(1), {ActionId{2}}}}), {r});
  std::vector<MonitorEvent> events;
  s.process_packets(key(1), 0, 10, [&](const MonitorEvent& e) { events.push_back(e); });
  EXPECT_EQ(s.stats().rule_hits, 10u);
  EXPECT_EQ(s.stats().adm_lookups, 0u);
  EXPECT_EQ(s.stats().actbf_lookups, 0u);
  for (const auto& e : events) EXPECT_EQ(e.action, count_action);
}

TEST(SwitchState, HigherPriorityRuleWins) {
  SwitchState s(1, config(), catalog());
  WildcardRule low = match_all_rule(count_action, 1);
  WildcardRule high = match_all_rule(ActionId{1}, 5);
  high.dst_port = 80;
  s.install(TwoStageFilter(), {low, high});
  EXPECT_EQ(s.rules().front().priority, 5);
  std::vector<ActionId> seen;
  s.process_packets(key(1), 0, 64, [&](const MonitorEvent& e) { seen.push_back(e.action); });
  for (ActionId a : seen) EXPECT_EQ(a, ActionId{1});
  FlowKey other = key(1);
  other.dst_port = 22;
  seen.clear();
  s.process_packets(other, 0, 4, [&](const MonitorEvent& e) { seen.push_back(e.action); });
  EXPECT_EQ(seen.size(), 4u);
  for (ActionId a : seen) EXPECT_EQ(a, count_action);
}

TEST(SwitchState, HashPrefixRule) {
  WildcardRule r = match_all_rule(count_action);
  const auto p = HashPrefix::prefix_of(key(7), 6, 9);
  r.hash_prefix = HashPrefix{6, p, 9};
  EXPECT_TRUE(r.matches(key(7)));
  int matched = 0;
  for (std::uint32_t i = 0; i < 6400; ++i) matched += r.matches(key(i));
  EXPECT_NEAR(matched, 100, 40);
}

TEST(SwitchState, DeterministicEventStreams) {
  auto run = [] {
    SwitchState s(1, config(), catalog());
    s.install(filter_with({{key(1), {ActionId{2}, count_action}}, {key(2), {ActionId{1}}}}), {});
    std::vector<MonitorEvent> out;
    for (std::uint32_t i = 0; i < 20; ++i) {
      s.process_packets(key(1 + i % 3), i * 10, 10, [&](const MonitorEvent& e) { out.push_back(e); });
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(SwitchState, BlobInstallMatchesObjectInstall) {
  const auto t = filter_with({{key(1), {ActionId{2}}}});
  SwitchState a(1, config(), catalog()), b(1, config(), catalog());
  a.install(t, {});
  b.install_blob(t.serialize(), {});
  EXPECT_EQ(a.filter(), b.filter());
  EXPECT_EQ(b.filter().serialize(), t.serialize());
}

TEST(SwitchState, BudgetCheckedAtInstall) {
  SwitchConfig c = config();
  c.memory_budget = 4096 + 100;
  SwitchState s(1, c, catalog());
  TwoStageFilter small(BloomFilter(8 * 40, 2, 1));
  small.add_action(count_action, 8 * 40, 2, 2);
  EXPECT_NO_THROW(s.install(small, {}));
  EXPECT_LE(s.memory_used(), c.memory_budget);
  TwoStageFilter big(BloomFilter(8 * 80, 2, 1));
  big.add_action(count_action, 8 * 40, 2, 2);
  try {
    s.install(big, {});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::budget_exceeded);
  }
  EXPECT_THROW(s.install(small, {match_all_rule(count_action), match_all_rule(count_action)}), error);
}

TEST(SwitchState, SketchesSurviveReinstall) {
  SwitchState s(1, config(), catalog());
  s.install(filter_with({{key(1), {count_action}}}), {});
  s.process_packets(key(1), 0, 9, [](const MonitorEvent&) {});
  s.install(filter_with({{key(2), {count_action}}}), {});
  EXPECT_GE(s.sketch(count_action)->query(key(1)), 9u);
}

TEST(SwitchState, ReportDrainsAndPrices) {
  SwitchState s(1, config(), catalog());
  s.install(filter_with({{key(1), {ActionId{1}, count_action}}}), {});
  s.process_packets(key(1), 0, 1000, [](const MonitorEvent&) {});
  const auto n = s.buffered_samples();
  EXPECT_GT(n, 0u);
  EXPECT_EQ(s.stats().pending_report_bytes, 32 * n);
  const auto r = s.report();
  EXPECT_EQ(r.samples.size(), n);
  EXPECT_EQ(r.bytes, 32 * n + s.sketch(count_action)->memory_bytes());
  EXPECT_EQ(r.sketches.size(), 1u);
  EXPECT_EQ(s.buffered_samples(), 0u);
  EXPECT_EQ(s.report().samples.size(), 0u);
}
