#pragma once

#include <map>
#include <memory>

#include "dcm/error.hpp"
#include "dcm/sampling.hpp"
#include "dcm/two_stage_filter.hpp"

namespace dcm {

enum class ActionKind {
  count,            // increment the switch's Count-Min sketch
  sample_interval,  // sample packets whose hash falls in action_interval(i)
  sample_fraction,  // sample packets whose hash falls in [0, rate)
};

struct ActionSpec {
  ActionKind kind = ActionKind::count;
  unsigned interval = 0;
  SampleRate rate{};

  [[nodiscard]] bool is_sampling() const noexcept { return kind != ActionKind::count; }

  [[nodiscard]] bool selects(double packet_hash_value) const {
    switch (kind) {
      case ActionKind::count: return true;
      case ActionKind::sample_interval: return should_sample(interval, packet_hash_value);
      case ActionKind::sample_fraction: return packet_hash_value < rate.value();
    }
    return false;
  }
};

inline constexpr ActionId count_action{0};
inline constexpr ActionId fixed_rate_action{100};
inline constexpr unsigned max_sample_interval = 32;

inline ActionId interval_action(unsigned i) {
  if (i == 0 || i > max_sample_interval) throw error(errc::invalid_parameter, "interval index must lie in [1, 32]");
  return ActionId{i};
}

/// Deployment-wide mapping from ActionId to what the action does. Shared by the controller and every
/// switch so ids stay stable across filter reconstructions.
class ActionCatalog {
public:
  void add(ActionId id, ActionSpec spec) {
    if (!specs_.emplace(id, spec).second) throw error(errc::invalid_parameter, "duplicate action " + to_string(id));
  }

  [[nodiscard]] const ActionSpec* find(ActionId id) const noexcept {
    auto it = specs_.find(id);
    return it == specs_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] const ActionSpec& at(ActionId id) const {
    if (const auto* s = find(id)) return *s;
    throw error(errc::unknown_action, "action " + to_string(id) + " is not registered");
  }

  [[nodiscard]] const std::map<ActionId, ActionSpec>& all() const noexcept { return specs_; }

  // Counting at id 0 and one sampling action per dyadic interval at ids 1..32.
  static ActionCatalog standard() {
    ActionCatalog c;
    c.add(count_action, ActionSpec{ActionKind::count, 0, {}});
    for (unsigned i = 1; i <= max_sample_interval; ++i) c.add(ActionId{i}, ActionSpec{ActionKind::sample_interval, i, {}});
    return c;
  }

  static ActionCatalog with_fixed_rate(SampleRate rate) {
    auto c = standard();
    c.add(fixed_rate_action, ActionSpec{ActionKind::sample_fraction, 0, rate});
    return c;
  }

private:
  std::map<ActionId, ActionSpec> specs_;
};

using CatalogPtr = std::shared_ptr<const ActionCatalog>;

}  // namespace dcm
