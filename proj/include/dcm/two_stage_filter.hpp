#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcm/bloom_filter.hpp"
#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"

namespace dcm {

struct ActionId {
  std::uint32_t value = 0;

  friend auto operator<=>(const ActionId&, const ActionId&) = default;
  friend bool operator==(const ActionId&, const ActionId&) = default;
};

inline std::string to_string(ActionId a) { return "A" + std::to_string(a.value); }

/// Admission filter plus one action filter per monitor action. A flow reaches the action filters
/// only after passing the admission filter.
class TwoStageFilter {
public:
  struct Entry {
    ActionId action;
    BloomFilter filter;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  static constexpr std::uint8_t format_version = 1;

  TwoStageFilter() : adm_(1, 1, 0) {}
  explicit TwoStageFilter(BloomFilter adm) : adm_(std::move(adm)) {}

  // Adds an empty action filter. Filters are only ever populated through insert() so every
  // action-filter member is also an admission member.
  void add_action(ActionId action, std::uint64_t m_bits, unsigned k, std::uint64_t seed) {
    if (has_action(action)) throw error(errc::invalid_parameter, "duplicate action " + to_string(action));
    auto it = std::lower_bound(acts_.begin(), acts_.end(), action,
                               [](const Entry& e, ActionId a) { return e.action < a; });
    acts_.insert(it, Entry{action, BloomFilter(m_bits, k, seed)});
  }

  void insert(const FlowKey& flow, ActionId action) {
    auto* e = find(action);
    if (e == nullptr) throw error(errc::unknown_action, "no action filter for " + to_string(action));
    adm_.insert(flow);
    e->filter.insert(flow);
  }

  // Admits the flow once and binds it to every listed action.
  void insert(const FlowKey& flow, std::span<const ActionId> actions) {
    if (actions.empty()) return;
    std::vector<Entry*> targets;
    targets.reserve(actions.size());
    for (ActionId a : actions) {
      auto* e = find(a);
      if (e == nullptr) throw error(errc::unknown_action, "no action filter for " + to_string(a));
      targets.push_back(e);
    }
    const auto key = flow.bytes();
    const std::span<const std::byte> bytes(key);
    adm_.insert(bytes);
    for (auto* e : targets) e->filter.insert(bytes);
  }

  // Appends the matching actions to `out`. Returns the number of action-filter lookups made, which
  // is zero whenever the admission filter rejects the flow.
  std::size_t classify_into(const FlowKey& flow, std::vector<ActionId>& out) const {
    const auto key = flow.bytes();
    const std::span<const std::byte> bytes(key);
    if (!adm_.contains(bytes)) return 0;
    for (const auto& e : acts_) {
      if (e.filter.contains(bytes)) out.push_back(e.action);
    }
    return acts_.size();
  }

  [[nodiscard]] std::vector<ActionId> classify(const FlowKey& flow) const {
    std::vector<ActionId> out;
    classify_into(flow, out);
    return out;
  }

  [[nodiscard]] bool has_action(ActionId action) const noexcept { return find(action) != nullptr; }
  [[nodiscard]] const BloomFilter& adm() const noexcept { return adm_; }
  [[nodiscard]] const std::vector<Entry>& actions() const noexcept { return acts_; }
  [[nodiscard]] const BloomFilter* action_filter(ActionId action) const noexcept { return find(action); }

  [[nodiscard]] std::uint64_t byte_size() const noexcept {
    std::uint64_t total = adm_.byte_size();
    for (const auto& e : acts_) total += e.filter.byte_size();
    return total;
  }

  // "DCMT", version u8, action count u32, admission filter blob, then per action: id u32 + filter blob.
  [[nodiscard]] std::vector<std::byte> serialize() const {
    std::vector<std::byte> out;
    out.insert(out.end(), {std::byte{'D'}, std::byte{'C'}, std::byte{'M'}, std::byte{'T'}});
    out.push_back(std::byte{format_version});
    put_u32(out, static_cast<std::uint32_t>(acts_.size()));
    adm_.append_to(out);
    for (const auto& e : acts_) {
      put_u32(out, e.action.value);
      e.filter.append_to(out);
    }
    return out;
  }

  static TwoStageFilter deserialize(std::span<const std::byte> in) {
    if (in.size() < 9) throw error(errc::format_error, "truncated two-stage filter blob");
    if (in[0] != std::byte{'D'} || in[1] != std::byte{'C'} || in[2] != std::byte{'M'} || in[3] != std::byte{'T'})
      throw error(errc::format_error, "bad two-stage filter magic");
    if (in[4] != std::byte{format_version}) throw error(errc::format_error, "unsupported two-stage filter version");
    const std::uint32_t count = get_u32(in, 5);
    std::size_t offset = 9;
    TwoStageFilter t(BloomFilter::read_from(in, offset));
    for (std::uint32_t i = 0; i < count; ++i) {
      if (in.size() < offset + 4) throw error(errc::format_error, "truncated action entry");
      const ActionId action{get_u32(in, offset)};
      offset += 4;
      if (!t.acts_.empty() && !(t.acts_.back().action < action))
        throw error(errc::format_error, "action ids must be strictly increasing");
      t.acts_.push_back(Entry{action, BloomFilter::read_from(in, offset)});
    }
    if (offset != in.size()) throw error(errc::format_error, "trailing bytes after two-stage filter");
    return t;
  }

  friend bool operator==(const TwoStageFilter&, const TwoStageFilter&) = default;

private:
  [[nodiscard]] const BloomFilter* find(ActionId action) const noexcept {
    auto it = std::lower_bound(acts_.begin(), acts_.end(), action,
                               [](const Entry& e, ActionId a) { return e.action < a; });
    return (it != acts_.end() && it->action == action) ? &it->filter : nullptr;
  }
  [[nodiscard]] Entry* find(ActionId action) noexcept {
    auto it = std::lower_bound(acts_.begin(), acts_.end(), action,
                               [](const Entry& e, ActionId a) { return e.action < a; });
    return (it != acts_.end() && it->action == action) ? &*it : nullptr;
  }

  static void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  }
  static std::uint32_t get_u32(std::span<const std::byte> in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint32_t>(in[at + static_cast<std::size_t>(i)]);
    return v;
  }

  BloomFilter adm_;
  std::vector<Entry> acts_;
};

}  // namespace dcm

template <>
struct std::hash<dcm::ActionId> {
  std::size_t operator()(dcm::ActionId a) const noexcept { return std::hash<std::uint32_t>{}(a.value); }
};
