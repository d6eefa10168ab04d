#pragma once

// Independent re-statement of the three-tier placement policy, used to cross-check the controller.
// It keeps its own load table instead of asking the controller.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "dcm/types.hpp"

namespace dcm_test {

struct PolicyModel {
  // (switch, action) -> live flows; presence of the key means the switch holds that action filter.
  std::map<std::pair<dcm::SwitchId, std::uint32_t>, std::uint64_t> load;

  [[nodiscard]] bool hosts(dcm::SwitchId s, std::uint32_t a) const { return load.contains({s, a}); }
  [[nodiscard]] std::uint64_t load_of(dcm::SwitchId s, std::uint32_t a) const {
    auto it = load.find({s, a});
    return it == load.end() ? 0 : it->second;
  }
  [[nodiscard]] std::uint64_t filters_on(dcm::SwitchId s) const {
    std::uint64_t n = 0;
    for (const auto& [k, v] : load) n += k.first == s;
    return n;
  }

  // Returns (switch, tier).
  [[nodiscard]] std::pair<dcm::SwitchId, unsigned> choose(const dcm::Path& path, std::uint32_t a, std::uint64_t rho) const {
    std::vector<dcm::SwitchId> tier1, tier2;
    for (dcm::SwitchId s : path) {
      if (hosts(s, a) && load_of(s, a) < rho) tier1.push_back(s);
      if (!hosts(s, a)) tier2.push_back(s);
    }
    auto best_by = [](const std::vector<dcm::SwitchId>& cands, auto score) {
      std::optional<dcm::SwitchId> best;
      for (dcm::SwitchId s : cands) {
        if (!best || score(s) < score(*best) || (score(s) == score(*best) && s < *best)) best = s;
      }
      return best;
    };
    if (auto s = best_by(tier1, [&](dcm::SwitchId x) { return load_of(x, a); })) return {*s, 1};
    if (auto s = best_by(tier2, [&](dcm::SwitchId x) { return filters_on(x); })) return {*s, 2};
    std::vector<dcm::SwitchId> all(path.begin(), path.end());
    return {*best_by(all, [&](dcm::SwitchId x) { return load_of(x, a); }), 3};
  }

  void add(dcm::SwitchId s, std::uint32_t a) { ++load[{s, a}]; }
  void remove(dcm::SwitchId s, std::uint32_t a) { --load.at({s, a}); }
};

}  // namespace dcm_test
