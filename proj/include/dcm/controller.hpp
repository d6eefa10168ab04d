#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dcm/actions.hpp"
#include "dcm/bloom_filter.hpp"
#include "dcm/data_plane.hpp"
#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/hash.hpp"
#include "dcm/two_stage_filter.hpp"
#include "dcm/types.hpp"

namespace dcm {

struct ControllerConfig {
  double adm_fp = 1e-4;
  double act_fp = 1e-2;
  // A filter counts as over target once its analytic fp exceeds target * (1 + fp_slack); bf_size_for
  // itself may land up to this far above target after rounding k.
  double fp_slack = 0.05;
  Epoch period = 100;  // T: full reconstruction
  Epoch check = 10;    // T': fp check, T' < T
  std::map<ActionId, std::uint64_t> rho;
  std::uint64_t default_count_rho = 5000;
  std::uint64_t default_sample_rho = 2000;
  // When set, each switch's filters share exactly this many bytes instead of being sized from the
  // fp targets.
  std::optional<std::uint64_t> filter_bytes;
  std::uint64_t seed = 0;
};

struct MonitorTask {
  FlowKey flow;
  ActionId action;
  Path path;
  Epoch start_epoch = 0;
  std::optional<Epoch> end_epoch;
  SwitchId assigned = 0;
  unsigned tier = 0;  // 1-3 for policy allocations, 0 for wildcard tasks
  bool wildcard = false;
};

struct AllocationDecision {
  SwitchId switch_id;
  unsigned tier;
};

enum class InstallKind { incremental, full };

struct InstallDelta {
  SwitchId switch_id = 0;
  InstallKind kind = InstallKind::incremental;
  FlowKey flow;                    // incremental only
  std::vector<ActionId> actions;   // incremental only
  std::vector<std::byte> filter;   // full only: serialized TwoStageFilter
};

struct DedupeResult {
  std::vector<MonitorEvent> kept;
  std::vector<MonitorEvent> wasted;
};

using AuditSink = std::function<void(const nlohmann::json&)>;

/// Central monitoring state: who monitors which flow, the filter replicas installed on switches,
/// and the bookkeeping for periodic reconstruction.
class ControllerState {
public:
  ControllerState(ControllerConfig config, CatalogPtr catalog) : config_(std::move(config)), catalog_(std::move(catalog)) {
    if (!catalog_) throw error(errc::invalid_parameter, "controller needs an action catalog");
    if (config_.check == 0 || config_.period == 0) throw error(errc::invalid_parameter, "T and T' must be >= 1 epoch");
    if (config_.check >= config_.period) throw error(errc::invalid_parameter, "check period T' must be < T");
    bf_size_for(1, config_.adm_fp);
    bf_size_for(1, config_.act_fp);
  }

  void set_audit(AuditSink sink) { audit_ = std::move(sink); }

  [[nodiscard]] const ControllerConfig& config() const noexcept { return config_; }
  [[nodiscard]] const ActionCatalog& catalog() const noexcept { return *catalog_; }

  [[nodiscard]] std::uint64_t threshold(ActionId action) const {
    if (auto it = config_.rho.find(action); it != config_.rho.end()) return it->second;
    return catalog_->at(action).is_sampling() ? config_.default_sample_rho : config_.default_count_rho;
  }

  // Three tiers: (1) a path switch already hosting the action's filter with load below rho, least
  // loaded first; (2) a path switch without that filter, fewest hosted action filters first; (3) the
  // least loaded path switch. Ties go to the lowest switch id. Only controller state changes.
  AllocationDecision allocate_decision(const FlowKey& flow, ActionId action, const Path& path, Epoch epoch = 0) {
    if (path.empty()) throw error(errc::empty_path, "flow " + to_string(flow) + " has an empty path");
    (void)catalog_->at(action);
    if (const auto* t = find_task(flow, action))
      throw error(errc::invalid_parameter, "flow " + to_string(flow) + " already assigned for " + to_string(action) +
                                               " (switch " + std::to_string(t->assigned) + ")");
    const std::uint64_t rho = threshold(action);

    std::optional<std::pair<std::uint64_t, SwitchId>> best;
    unsigned tier = 1;
    for (SwitchId s : path) {
      if (!hosts_action(s, action)) continue;
      const std::uint64_t l = load(s, action);
      if (l < rho && (!best || std::pair{l, s} < *best)) best = std::pair{l, s};
    }
    if (!best) {
      tier = 2;
      for (SwitchId s : path) {
        if (hosts_action(s, action)) continue;
        const std::uint64_t n = actbf_count(s);
        if (!best || std::pair{n, s} < *best) best = std::pair{n, s};
      }
    }
    if (!best) {
      tier = 3;
      for (SwitchId s : path) {
        const std::uint64_t l = load(s, action);
        if (!best || std::pair{l, s} < *best) best = std::pair{l, s};
      }
    }
    const SwitchId chosen = best->second;
    hosted_[chosen][action].insert(flow);
    record_task(flow, action, path, epoch, chosen, tier, false);
    const std::uint64_t after = load(chosen, action);
    if (tier == 3) ++overloads_;
    if (audit_) {
      audit_({{"event", "allocate"},
              {"flow", to_string(flow)},
              {"action", action.value},
              {"switch", chosen},
              {"tier", tier},
              {"load", after},
              {"rho", rho},
              {"overloaded", after > rho}});
    }
    return {chosen, tier};
  }

  SwitchId allocate(const FlowKey& flow, ActionId action, const Path& path) {
    return allocate_decision(flow, action, path).switch_id;
  }

  // Allocates and records the task at `epoch` without touching any filter replica.
  SwitchId register_flow(const FlowKey& flow, ActionId action, const Path& path, Epoch epoch) {
    return allocate_decision(flow, action, path, epoch).switch_id;
  }

  // Records an assignment decided outside the policy. Wildcard tasks do not count toward rho.
  void assign(const FlowKey& flow, ActionId action, const Path& path, SwitchId sw, Epoch epoch, bool wildcard) {
    if (path.empty()) throw error(errc::empty_path, "flow " + to_string(flow) + " has an empty path");
    if (std::find(path.begin(), path.end(), sw) == path.end())
      throw error(errc::invalid_parameter, "switch " + std::to_string(sw) + " is not on the flow's path");
    if (find_task(flow, action)) throw error(errc::invalid_parameter, "flow already assigned for this action");
    (void)catalog_->at(action);
    if (!wildcard) hosted_[sw][action].insert(flow);
    record_task(flow, action, path, epoch, sw, 0, wildcard);
  }

  // Real-time addition: allocate each action, then either insert into the assigned switch's current
  // filters or, when that switch lacks a filter for the action, rebuild the switch.
  std::vector<InstallDelta> on_new_flow(const FlowKey& flow, std::span<const ActionId> actions, const Path& path,
                                        Epoch epoch) {
    std::map<SwitchId, std::vector<ActionId>> by_switch;
    for (ActionId a : actions) by_switch[register_flow(flow, a, path, epoch)].push_back(a);

    std::vector<InstallDelta> deltas;
    for (auto& [sw, acts] : by_switch) {
      auto it = replicas_.find(sw);
      const bool needs_rebuild =
          it == replicas_.end() ||
          std::any_of(acts.begin(), acts.end(), [&](ActionId a) { return !it->second.has_action(a); });
      if (needs_rebuild) {
        deltas.push_back(full_install(sw, epoch, "new-action"));
      } else {
        it->second.insert(flow, std::span<const ActionId>(acts));
        InstallDelta d;
        d.switch_id = sw;
        d.kind = InstallKind::incremental;
        d.flow = flow;
        d.actions = acts;
        deltas.push_back(std::move(d));
      }
    }
    return deltas;
  }

  std::vector<InstallDelta> on_new_flow(const FlowKey& flow, ActionId action, const Path& path, Epoch epoch) {
    return on_new_flow(flow, std::span<const ActionId>(&action, 1), path, epoch);
  }

  // Marks the flow ended; its filter membership stays until the next reconstruction.
  void on_flow_end(const FlowKey& flow, Epoch epoch) {
    auto it = flows_.find(flow);
    if (it == flows_.end()) throw error(errc::unknown_flow, to_string(flow));
    for (auto& [action, task] : it->second) {
      if (task.end_epoch) continue;
      task.end_epoch = epoch;
      if (!task.wildcard) {
        auto hs = hosted_.find(task.assigned);
        if (hs != hosted_.end()) {
          auto as = hs->second.find(action);
          if (as != hs->second.end()) as->second.erase(flow);
        }
      }
    }
  }

  // Computes a switch's filters from its live assigned flows, stores the replica and returns it.
  TwoStageFilter build_filters(SwitchId sw) {
    std::map<ActionId, std::vector<FlowKey>> members;
    auto hs = hosted_.find(sw);
    if (hs != hosted_.end()) {
      for (auto it = hs->second.begin(); it != hs->second.end();) {
        if (it->second.empty()) {
          it = hs->second.erase(it);
          continue;
        }
        auto& v = members[it->first];
        v.assign(it->second.begin(), it->second.end());
        std::sort(v.begin(), v.end());
        ++it;
      }
      if (hs->second.empty()) hosted_.erase(hs);
    }

    std::map<FlowKey, std::vector<ActionId>> per_flow;
    for (const auto& [a, flows] : members) {
      for (const auto& f : flows) per_flow[f].push_back(a);
    }

    const std::uint64_t switch_seed = hashing::mix_seed(config_.seed, sw);
    const std::uint64_t adm_seed = hashing::mix_seed(switch_seed, 0xad);
    auto act_seed = [&](ActionId a) { return hashing::mix_seed(switch_seed, 0x1000 + std::uint64_t{a.value}); };

    TwoStageFilter tsf;
    if (members.empty()) {
      tsf = TwoStageFilter(BloomFilter(8, 1, adm_seed));
    } else if (!config_.filter_bytes) {
      tsf = TwoStageFilter(BloomFilter::sized_for(per_flow.size(), config_.adm_fp, adm_seed));
      for (const auto& [a, flows] : members) {
        const auto s = bf_size_for(flows.size(), config_.act_fp);
        tsf.add_action(a, s.m_bits, s.k, act_seed(a));
      }
    } else {
      // Split the byte budget in proportion to what each filter would need at its fp target.
      std::vector<std::pair<std::uint64_t, double>> want;  // (n, ideal bits)
      auto ideal = [](std::uint64_t n, double fp) { return -static_cast<double>(n) * std::log(fp) / (std::log(2.0) * std::log(2.0)); };
      want.emplace_back(per_flow.size(), ideal(per_flow.size(), config_.adm_fp));
      for (const auto& [a, flows] : members) want.emplace_back(flows.size(), ideal(flows.size(), config_.act_fp));
      double total = 0;
      for (const auto& w : want) total += w.second;
      const std::uint64_t budget = *config_.filter_bytes;
      std::vector<std::uint64_t> bytes;
      std::uint64_t used = 0;
      for (const auto& w : want) {
        const auto b = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(static_cast<double>(budget) * w.second / total)));
        bytes.push_back(b);
        used += b;
      }
      if (used > budget)
        throw error(errc::budget_exceeded, "switch " + std::to_string(sw) + " filter budget too small for " +
                                               std::to_string(want.size()) + " filters");
      tsf = TwoStageFilter(BloomFilter(bytes[0] * 8, bf_optimal_k(bytes[0] * 8, want[0].first), adm_seed));
      std::size_t i = 1;
      for (const auto& [a, flows] : members) {
        tsf.add_action(a, bytes[i] * 8, bf_optimal_k(bytes[i] * 8, want[i].first), act_seed(a));
        ++i;
      }
    }
    for (const auto& [f, acts] : per_flow) tsf.insert(f, std::span<const ActionId>(acts));
    replicas_[sw] = tsf;
    return tsf;
  }

  // Every T epochs all filters are rebuilt from live flows; every T' epochs any switch holding a filter
  // above its fp target is rebuilt. Returns the full installs to deliver.
  std::vector<std::pair<SwitchId, TwoStageFilter>> periodic_maintenance(Epoch epoch) {
    std::vector<std::pair<SwitchId, TwoStageFilter>> out;
    if (epoch % config_.period == 0) {
      std::set<SwitchId> targets;
      for (const auto& [sw, r] : replicas_) targets.insert(sw);
      for (const auto& [sw, h] : hosted_) targets.insert(sw);
      for (SwitchId sw : targets) out.emplace_back(sw, rebuild(sw, epoch, "period"));
      return out;
    }
    if (epoch % config_.check != 0) return out;
    std::vector<SwitchId> stale;
    for (const auto& [sw, r] : replicas_) {
      if (over_target(r)) stale.push_back(sw);
    }
    for (SwitchId sw : stale) out.emplace_back(sw, rebuild(sw, epoch, "fp-check"));
    return out;
  }

  [[nodiscard]] bool over_target(const TwoStageFilter& t) const {
    if (t.adm().fp_rate() > config_.adm_fp * (1 + config_.fp_slack)) return true;
    return std::any_of(t.actions().begin(), t.actions().end(), [&](const TwoStageFilter::Entry& e) {
      return e.filter.fp_rate() > config_.act_fp * (1 + config_.fp_slack);
    });
  }

  // Path switches other than the assigned one whose replica classifies the flow into `action`.
  [[nodiscard]] std::set<SwitchId> detect_false_positives(const FlowKey& flow, ActionId action) const {
    auto it = flows_.find(flow);
    if (it == flows_.end() || it->second.empty()) throw error(errc::unknown_flow, to_string(flow));
    const auto& any_task = it->second.begin()->second;
    const auto* task = find_task(flow, action);
    std::set<SwitchId> out;
    std::vector<ActionId> matched;
    for (SwitchId s : any_task.path) {
      if (task && s == task->assigned) continue;
      auto r = replicas_.find(s);
      if (r == replicas_.end()) continue;
      matched.clear();
      r->second.classify_into(flow, matched);
      if (std::find(matched.begin(), matched.end(), action) != matched.end()) out.insert(s);
    }
    return out;
  }

  [[nodiscard]] bool is_assigned(SwitchId sw, const FlowKey& flow, ActionId action) const {
    const auto* t = find_task(flow, action);
    return t != nullptr && t->assigned == sw;
  }

  // An event is wasted when its (flow, action) is not assigned to the reporting switch.
  DedupeResult dedupe_reports(std::span<const MonitorEvent> events) {
    DedupeResult r;
    std::map<std::tuple<SwitchId, FlowKey, ActionId>, std::uint64_t> dropped;
    for (const auto& e : events) {
      if (is_assigned(e.switch_id, e.flow, e.action)) {
        r.kept.push_back(e);
      } else {
        r.wasted.push_back(e);
        if (audit_) ++dropped[{e.switch_id, e.flow, e.action}];
      }
    }
    if (audit_) {
      for (const auto& [key, n] : dropped) {
        audit_({{"event", "dedupe-drop"},
                {"switch", std::get<0>(key)},
                {"flow", to_string(std::get<1>(key))},
                {"action", std::get<2>(key).value},
                {"events", n}});
      }
      audit_({{"event", "dedupe"}, {"kept", r.kept.size()}, {"wasted", r.wasted.size()}});
    }
    return r;
  }

  [[nodiscard]] const MonitorTask* find_task(const FlowKey& flow, ActionId action) const {
    auto it = flows_.find(flow);
    if (it == flows_.end()) return nullptr;
    auto t = it->second.find(action);
    return t == it->second.end() ? nullptr : &t->second;
  }

  [[nodiscard]] const MonitorTask& task(const FlowKey& flow, ActionId action) const {
    if (const auto* t = find_task(flow, action)) return *t;
    throw error(errc::unknown_flow, to_string(flow) + " has no task for " + to_string(action));
  }

  [[nodiscard]] std::vector<MonitorTask> tasks_of(const FlowKey& flow) const {
    std::vector<MonitorTask> out;
    if (auto it = flows_.find(flow); it != flows_.end()) {
      for (const auto& [a, t] : it->second) out.push_back(t);
    }
    return out;
  }

  [[nodiscard]] bool hosts_action(SwitchId sw, ActionId action) const {
    auto it = hosted_.find(sw);
    return it != hosted_.end() && it->second.contains(action);
  }

  // Live flows assigned to (switch, action), wildcard tasks excluded.
  [[nodiscard]] std::uint64_t load(SwitchId sw, ActionId action) const {
    auto it = hosted_.find(sw);
    if (it == hosted_.end()) return 0;
    auto a = it->second.find(action);
    return a == it->second.end() ? 0 : a->second.size();
  }

  [[nodiscard]] std::uint64_t actbf_count(SwitchId sw) const {
    auto it = hosted_.find(sw);
    return it == hosted_.end() ? 0 : it->second.size();
  }

  [[nodiscard]] std::vector<FlowKey> live_flows(SwitchId sw, ActionId action) const {
    std::vector<FlowKey> out;
    if (auto it = hosted_.find(sw); it != hosted_.end()) {
      if (auto a = it->second.find(action); a != it->second.end()) out.assign(a->second.begin(), a->second.end());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  [[nodiscard]] std::vector<ActionId> hosted_actions(SwitchId sw) const {
    std::vector<ActionId> out;
    if (auto it = hosted_.find(sw); it != hosted_.end()) {
      for (const auto& [a, f] : it->second) out.push_back(a);
    }
    return out;
  }

  [[nodiscard]] const TwoStageFilter* replica(SwitchId sw) const {
    auto it = replicas_.find(sw);
    return it == replicas_.end() ? nullptr : &it->second;
  }
  [[nodiscard]] const std::map<SwitchId, TwoStageFilter>& replicas() const noexcept { return replicas_; }

  [[nodiscard]] std::size_t flow_count() const noexcept { return flows_.size(); }
  [[nodiscard]] std::uint64_t overload_count() const noexcept { return overloads_; }
  [[nodiscard]] std::uint64_t reconstruction_count() const noexcept { return reconstructions_; }

private:
  void record_task(const FlowKey& flow, ActionId action, const Path& path, Epoch epoch, SwitchId sw, unsigned tier,
                   bool wildcard) {
    MonitorTask t;
    t.flow = flow;
    t.action = action;
    t.path = path;
    t.start_epoch = epoch;
    t.assigned = sw;
    t.tier = tier;
    t.wildcard = wildcard;
    flows_[flow].emplace(action, std::move(t));
  }

  TwoStageFilter rebuild(SwitchId sw, Epoch epoch, const char* reason) {
    auto tsf = build_filters(sw);
    ++reconstructions_;
    if (audit_) {
      nlohmann::json acts = nlohmann::json::array();
      for (const auto& e : tsf.actions()) {
        acts.push_back({{"action", e.action.value},
                        {"flows", e.filter.inserted()},
                        {"bits", e.filter.bit_size()},
                        {"k", e.filter.hash_count()}});
      }
      audit_({{"event", "reconstruct"},
              {"epoch", epoch},
              {"switch", sw},
              {"reason", reason},
              {"adm_flows", tsf.adm().inserted()},
              {"adm_bits", tsf.adm().bit_size()},
              {"adm_k", tsf.adm().hash_count()},
              {"actions", std::move(acts)}});
    }
    return tsf;
  }

  InstallDelta full_install(SwitchId sw, Epoch epoch, const char* reason) {
    InstallDelta d;
    d.switch_id = sw;
    d.kind = InstallKind::full;
    d.filter = rebuild(sw, epoch, reason).serialize();
    return d;
  }

  ControllerConfig config_;
  CatalogPtr catalog_;
  AuditSink audit_;
  std::unordered_map<FlowKey, std::map<ActionId, MonitorTask>> flows_;
  std::map<SwitchId, std::map<ActionId, std::unordered_set<FlowKey>>> hosted_;
  std::map<SwitchId, TwoStageFilter> replicas_;
  std::uint64_t overloads_ = 0;
  std::uint64_t reconstructions_ = 0;
};

}  // namespace dcm
