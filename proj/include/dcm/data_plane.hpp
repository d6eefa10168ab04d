#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dcm/actions.hpp"
#include "dcm/count_min.hpp"
#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/hash.hpp"
#include "dcm/sampling.hpp"
#include "dcm/two_stage_filter.hpp"
#include "dcm/types.hpp"

namespace dcm {

struct IpPrefix {
  ipv4 address = 0;
  unsigned length = 0;

  [[nodiscard]] std::uint32_t mask() const noexcept { return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length); }
  [[nodiscard]] bool matches(ipv4 ip) const noexcept { return ((ip ^ address) & mask()) == 0; }

  friend bool operator==(const IpPrefix&, const IpPrefix&) = default;
};

// Matches flows whose keyed 5-tuple hash starts with `value` in its top `bits` bits.
struct HashPrefix {
  unsigned bits = 0;
  std::uint64_t value = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] static std::uint64_t prefix_of(const FlowKey& f, unsigned bits, std::uint64_t seed) noexcept {
    return bits == 0 ? 0 : f.hash(seed).h1 >> (64 - bits);
  }
  [[nodiscard]] bool matches(const FlowKey& f) const noexcept { return prefix_of(f, bits, seed) == value; }

  friend bool operator==(const HashPrefix&, const HashPrefix&) = default;
};

struct WildcardRule {
  IpPrefix src;
  IpPrefix dst;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<std::uint8_t> protocol;
  std::optional<HashPrefix> hash_prefix;
  ActionId action;
  int priority = 0;

  [[nodiscard]] bool matches(const FlowKey& f) const noexcept {
    if (!src.matches(f.src_ip) || !dst.matches(f.dst_ip)) return false;
    if (src_port && *src_port != f.src_port) return false;
    if (dst_port && *dst_port != f.dst_port) return false;
    if (protocol && *protocol != f.protocol) return false;
    if (hash_prefix && !hash_prefix->matches(f)) return false;
    return true;
  }

  friend bool operator==(const WildcardRule&, const WildcardRule&) = default;
};

inline WildcardRule match_all_rule(ActionId action, int priority = 0) {
  WildcardRule r;
  r.action = action;
  r.priority = priority;
  return r;
}

enum class EventKind { counted, sampled };

struct MonitorEvent {
  SwitchId switch_id = 0;
  FlowKey flow;
  ActionId action;
  EventKind kind = EventKind::counted;
  std::uint32_t ordinal = 0;

  friend bool operator==(const MonitorEvent&, const MonitorEvent&) = default;
};

struct SwitchConfig {
  std::uint64_t memory_budget = 0;  // bytes; 0 disables the install-time check
  std::uint64_t sketch_bytes = 64 * 1024;
  std::size_t sketch_depth = CountMinSketch::default_depth;
  std::uint64_t seed = 0;
  std::uint64_t packet_hash_seed = 0;  // network-wide, so a packet hashes identically on every switch
  std::uint64_t rule_bytes = 40;
  std::uint64_t sample_record_bytes = 32;
};

struct SwitchStats {
  std::uint64_t packets = 0;
  std::uint64_t rule_hits = 0;
  std::uint64_t adm_lookups = 0;
  std::uint64_t adm_hits = 0;
  std::uint64_t actbf_lookups = 0;
  std::uint64_t counted = 0;
  std::uint64_t samples = 0;
  std::uint64_t pending_report_bytes = 0;

  friend bool operator==(const SwitchStats&, const SwitchStats&) = default;
};

struct SwitchReport {
  std::vector<MonitorEvent> samples;
  std::map<ActionId, CountMinSketch> sketches;
  std::uint64_t bytes = 0;
};

/// One simulated switch: wildcard rules, then the admission filter, then the action filters.
class SwitchState {
public:
  SwitchState(SwitchId id, SwitchConfig config, CatalogPtr catalog)
      : id_(id), config_(config), catalog_(std::move(catalog)) {
    if (!catalog_) throw error(errc::invalid_parameter, "switch needs an action catalog");
  }

  // Replaces filter and rules together. Sketches of counting actions survive reinstalls; new
  // counting actions get an empty sketch.
  void install(TwoStageFilter filter, std::vector<WildcardRule> rules) {
    std::stable_sort(rules.begin(), rules.end(),
                     [](const WildcardRule& a, const WildcardRule& b) { return a.priority > b.priority; });
    std::map<ActionId, CountMinSketch> added;
    auto ensure_backend = [&](ActionId a) {
      const auto& spec = catalog_->at(a);
      if (spec.kind == ActionKind::count && !sketches_.contains(a) && !added.contains(a)) {
        added.emplace(a, CountMinSketch::with_memory(config_.sketch_bytes, config_.sketch_depth,
                                                    hashing::mix_seed(config_.seed, (std::uint64_t{id_} << 32) | a.value)));
      }
    };
    for (const auto& e : filter.actions()) ensure_backend(e.action);
    for (const auto& r : rules) ensure_backend(r.action);

    std::uint64_t sketch_total = 0;
    for (const auto& [a, s] : sketches_) sketch_total += s.memory_bytes();
    for (const auto& [a, s] : added) sketch_total += s.memory_bytes();
    const std::uint64_t need = filter.byte_size() + sketch_total + rules.size() * config_.rule_bytes;
    if (config_.memory_budget != 0 && need > config_.memory_budget)
      throw error(errc::budget_exceeded, "switch " + std::to_string(id_) + " needs " + std::to_string(need) +
                                             " bytes, budget is " + std::to_string(config_.memory_budget));

    sketches_.merge(added);
    filter_ = std::move(filter);
    rules_ = std::move(rules);
  }

  void install_blob(std::span<const std::byte> filter_blob, std::vector<WildcardRule> rules) {
    install(TwoStageFilter::deserialize(filter_blob), std::move(rules));
  }

  // Insert-only update between reconstructions.
  void insert_flow(const FlowKey& flow, std::span<const ActionId> actions) {
    filter_.insert(flow, actions);
    if (config_.memory_budget != 0 && memory_used() > config_.memory_budget)
      throw error(errc::budget_exceeded, "switch " + std::to_string(id_) + " over budget after insert");
  }

  // Processes `count` consecutive packets of one flow (ordinals first_ordinal...). Every packet of a
  // flow classifies identically, so classification happens once per batch; per-packet work is only
  // the sampling hash. `sink` receives each MonitorEvent.
  template <typename Sink>
  void process_packets(const FlowKey& flow, std::uint32_t first_ordinal, std::uint32_t count, Sink&& sink) {
    if (count == 0) return;
    stats_.packets += count;
    matched_.clear();
    if (const WildcardRule* rule = match_rule(flow)) {
      stats_.rule_hits += count;
      matched_.push_back(rule->action);
    } else {
      stats_.adm_lookups += count;
      const std::size_t lookups = filter_.classify_into(flow, matched_);
      if (lookups == 0) return;
      stats_.adm_hits += count;
      stats_.actbf_lookups += static_cast<std::uint64_t>(lookups) * count;
    }
    apply(flow, first_ordinal, count, sink);
  }

  std::vector<MonitorEvent> process_packet(const PacketId& p) {
    std::vector<MonitorEvent> out;
    process_packets(p.flow, p.discriminator, 1, [&out](const MonitorEvent& e) { out.push_back(e); });
    return out;
  }

  // Drains buffered samples and snapshots every sketch.
  SwitchReport report() {
    SwitchReport r;
    r.samples = std::move(sample_buffer_);
    sample_buffer_.clear();
    r.sketches = sketches_;
    r.bytes = r.samples.size() * config_.sample_record_bytes;
    for (const auto& [a, s] : sketches_) r.bytes += s.memory_bytes();
    stats_.pending_report_bytes = 0;
    return r;
  }

  [[nodiscard]] SwitchId id() const noexcept { return id_; }
  [[nodiscard]] const SwitchConfig& config() const noexcept { return config_; }
  [[nodiscard]] const TwoStageFilter& filter() const noexcept { return filter_; }
  [[nodiscard]] const std::vector<WildcardRule>& rules() const noexcept { return rules_; }
  [[nodiscard]] const SwitchStats& stats() const noexcept { return stats_; }
  [[nodiscard]] const std::map<ActionId, CountMinSketch>& sketches() const noexcept { return sketches_; }
  [[nodiscard]] const CountMinSketch* sketch(ActionId a) const noexcept {
    auto it = sketches_.find(a);
    return it == sketches_.end() ? nullptr : &it->second;
  }
  [[nodiscard]] std::size_t buffered_samples() const noexcept { return sample_buffer_.size(); }

  [[nodiscard]] std::uint64_t memory_used() const noexcept {
    std::uint64_t total = filter_.byte_size() + rules_.size() * config_.rule_bytes;
    for (const auto& [a, s] : sketches_) total += s.memory_bytes();
    return total;
  }

private:
  [[nodiscard]] const WildcardRule* match_rule(const FlowKey& flow) const noexcept {
    for (const auto& r : rules_) {
      if (r.matches(flow)) return &r;
    }
    return nullptr;
  }

  template <typename Sink>
  void apply(const FlowKey& flow, std::uint32_t first_ordinal, std::uint32_t count, Sink& sink) {
    bool any_sampling = false;
    for (ActionId a : matched_) {
      const auto& spec = catalog_->at(a);
      if (spec.kind != ActionKind::count) {
        any_sampling = true;
        continue;
      }
      sketches_.at(a).increment(flow, count);
      stats_.counted += count;
      MonitorEvent e{id_, flow, a, EventKind::counted, 0};
      for (std::uint32_t i = 0; i < count; ++i) {
        e.ordinal = first_ordinal + i;
        sink(std::as_const(e));
      }
    }
    if (!any_sampling) return;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t ordinal = first_ordinal + i;
      const double h = packet_hash(PacketId{flow, ordinal}, config_.packet_hash_seed);
      for (ActionId a : matched_) {
        const auto& spec = catalog_->at(a);
        if (!spec.is_sampling() || !spec.selects(h)) continue;
        MonitorEvent e{id_, flow, a, EventKind::sampled, ordinal};
        sample_buffer_.push_back(e);
        ++stats_.samples;
        stats_.pending_report_bytes += config_.sample_record_bytes;
        sink(std::as_const(e));
      }
    }
  }

  SwitchId id_;
  SwitchConfig config_;
  CatalogPtr catalog_;
  TwoStageFilter filter_;
  std::vector<WildcardRule> rules_;
  std::map<ActionId, CountMinSketch> sketches_;
  std::vector<MonitorEvent> sample_buffer_;
  SwitchStats stats_;
  std::vector<ActionId> matched_;
};

}  // namespace dcm
