#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dcm/actions.hpp"
#include "dcm/controller.hpp"
#include "dcm/data_plane.hpp"
#include "dcm/error.hpp"
#include "dcm/hash.hpp"
#include "dcm/topology.hpp"
#include "dcm/trace.hpp"

namespace dcm {

struct MethodSpec {
  enum class Kind { dcm, monitor_all, agg_ip, agg_hash };
  Kind kind = Kind::dcm;
  unsigned src_mask = 32;  // agg-ip
  unsigned dst_mask = 32;  // agg-ip
  unsigned prefix_bits = 8;  // agg-hash

  [[nodiscard]] bool uses_rules() const noexcept { return kind == Kind::agg_ip || kind == Kind::agg_hash; }
};

inline std::string to_string(const MethodSpec& m) {
  switch (m.kind) {
    case MethodSpec::Kind::dcm: return "dcm";
    case MethodSpec::Kind::monitor_all: return "monitor-all";
    case MethodSpec::Kind::agg_ip: return "agg-ip";
    case MethodSpec::Kind::agg_hash: return "agg-hash";
  }
  return "?";
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <typename T>
T spec_number(std::string_view tok, std::string_view what) {
  T v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
    throw error(errc::config_error, std::string(what) + ": expected a number, got '" + std::string(tok) + "'");
  return v;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

/// dcm | monitor-all | agg-ip:<src_mask>,<dst_mask> | agg-hash:<prefix_bits>
inline MethodSpec parse_method(std::string_view s) {
  MethodSpec m;
  if (s == "dcm") return m;
  if (s == "monitor-all") {
    m.kind = MethodSpec::Kind::monitor_all;
    return m;
  }
  if (s.starts_with("agg-ip:")) {
    const auto parts = detail::split(s.substr(7), ',');
    if (parts.size() != 2) throw error(errc::config_error, "agg-ip expects agg-ip:<src_mask>,<dst_mask>");
    m.kind = MethodSpec::Kind::agg_ip;
    m.src_mask = detail::spec_number<unsigned>(parts[0], "agg-ip src mask");
    m.dst_mask = detail::spec_number<unsigned>(parts[1], "agg-ip dst mask");
    if (m.src_mask > 32 || m.dst_mask > 32) throw error(errc::config_error, "agg-ip masks must lie in [0, 32]");
    return m;
  }
  if (s.starts_with("agg-hash:")) {
    m.kind = MethodSpec::Kind::agg_hash;
    m.prefix_bits = detail::spec_number<unsigned>(s.substr(9), "agg-hash prefix bits");
    if (m.prefix_bits > 32) throw error(errc::config_error, "agg-hash prefix bits must lie in [0, 32]");
    return m;
  }
  throw error(errc::config_error, "unknown method '" + std::string(s) + "'");
}

/// star:<cores>,<edges>,<hosts_per_edge> | fat-tree:<k> | file:<path>
inline Topology parse_topology(std::string_view s) {
  try {
    if (s.starts_with("star:")) {
      const auto parts = detail::split(s.substr(5), ',');
      if (parts.size() != 3) throw error(errc::config_error, "star expects star:<cores>,<edges>,<hosts_per_edge>");
      return topo_star(detail::spec_number<std::size_t>(parts[0], "star cores"),
                       detail::spec_number<std::size_t>(parts[1], "star edges"),
                       detail::spec_number<std::size_t>(parts[2], "star hosts per edge"));
    }
    if (s.starts_with("fat-tree:")) return topo_fat_tree(detail::spec_number<std::size_t>(s.substr(9), "fat-tree k"));
  } catch (const parse_error&) {
    throw;
  } catch (const error& e) {
    if (e.code() == errc::config_error) throw;
    throw error(errc::config_error, e.what());
  }
  if (s.starts_with("file:")) return topo_load(std::string(s.substr(5)));
  throw error(errc::config_error, "unknown topology spec '" + std::string(s) + "'");
}

struct TraceSource {
  std::optional<std::string> file;
  TraceSpec synth;
};

/// file:<path> | synth:key=value,... with keys flows, dist (zipf:<a> | pareto:<shape>:<scale> |
/// uniform:<lo>:<hi>), epochs, targeted, rate_num + rate_bits (rate = num / 2^bits), seed.
inline TraceSource parse_trace_source(std::string_view s, std::uint64_t default_seed) {
  TraceSource src;
  src.synth.seed = default_seed;
  if (s.starts_with("file:")) {
    src.file = std::string(s.substr(5));
    return src;
  }
  if (!s.starts_with("synth")) throw error(errc::config_error, "unknown trace spec '" + std::string(s) + "'");
  s.remove_prefix(5);
  if (s.empty()) return src;
  if (s.front() != ':') throw error(errc::config_error, "trace spec expects synth:key=value,...");
  s.remove_prefix(1);
  std::optional<std::uint64_t> rate_num;
  std::optional<unsigned> rate_bits;
  for (auto item : detail::split(s, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw error(errc::config_error, "trace option '" + std::string(item) + "' lacks '='");
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    if (key == "flows") {
      src.synth.flows = detail::spec_number<std::size_t>(val, "flows");
    } else if (key == "epochs") {
      src.synth.epochs = detail::spec_number<Epoch>(val, "epochs");
    } else if (key == "seed") {
      src.synth.seed = detail::spec_number<std::uint64_t>(val, "seed");
    } else if (key == "targeted") {
      src.synth.targeted_fraction = detail::spec_number<double>(val, "targeted");
    } else if (key == "rate_num") {
      rate_num = detail::spec_number<std::uint64_t>(val, "rate_num");
    } else if (key == "rate_bits") {
      rate_bits = detail::spec_number<unsigned>(val, "rate_bits");
    } else if (key == "dist") {
      const auto parts = detail::split(val, ':');
      if (parts[0] == "zipf" && parts.size() == 2) {
        src.synth.size = SizeDistribution::zipf(detail::spec_number<double>(parts[1], "zipf alpha"));
      } else if (parts[0] == "pareto" && parts.size() == 3) {
        src.synth.size = SizeDistribution::pareto(detail::spec_number<double>(parts[1], "pareto shape"),
                                                  detail::spec_number<double>(parts[2], "pareto scale"));
      } else if (parts[0] == "uniform" && parts.size() == 3) {
        src.synth.size = SizeDistribution::uniform(detail::spec_number<std::uint64_t>(parts[1], "uniform lo"),
                                                   detail::spec_number<std::uint64_t>(parts[2], "uniform hi"));
      } else {
        throw error(errc::config_error, "dist expects zipf:<a>, pareto:<shape>:<scale> or uniform:<lo>:<hi>");
      }
    } else {
      throw error(errc::config_error, "unknown trace option '" + std::string(key) + "'");
    }
  }
  if (rate_num.has_value() != rate_bits.has_value())
    throw error(errc::config_error, "rate_num and rate_bits must be given together");
  if (rate_num) {
    try {
      src.synth.rate = SampleRate(*rate_num, *rate_bits);
    } catch (const error& e) {
      throw error(errc::config_error, e.what());
    }
  }
  return src;
}

struct ExperimentConfig {
  std::string topology = "star:2,4,8";
  std::string trace = "synth:flows=10000";
  // When set, these replace the topology and trace strings above.
  std::optional<Topology> topology_override;
  std::optional<std::vector<FlowRecord>> trace_override;

  MethodSpec method;
  std::vector<std::uint64_t> memory{1u << 20};  // bytes per switch; filter bytes in the sampling studies
  std::vector<double> bf_fraction{0.05};         // dcm counting study only
  std::vector<unsigned> precision{6, 8, 10};     // multi-rate study only
  double adm_fp = 1e-4;
  double act_fp = 1e-2;
  std::map<ActionId, std::uint64_t> rho;
  std::uint64_t count_rho = 5000;
  std::uint64_t sample_rho = 2000;
  Epoch period = 100;
  Epoch check = 10;
  std::size_t sketch_depth = CountMinSketch::default_depth;
  std::uint64_t seed = 1;

  AuditSink audit;
  // Receives every switch's installed filter at the end of each run.
  std::function<void(const std::map<SwitchId, TwoStageFilter>&)> on_filters;
};

struct ReportRow {
  std::string method;
  std::uint64_t memory_bytes = 0;
  std::string param;
  std::string metric;
  double value = 0;
  std::uint64_t seed = 0;
  std::uint64_t flows = 0;
  std::uint64_t packets = 0;
};

struct ExperimentReport {
  static constexpr std::string_view header = "method,memory_bytes,param,metric,value,seed,flows,packets";

  std::vector<ReportRow> rows;

  [[nodiscard]] std::optional<double> find(std::string_view method, std::uint64_t memory, std::string_view param,
                                           std::string_view metric) const {
    for (const auto& r : rows) {
      if (r.method == method && r.memory_bytes == memory && r.param == param && r.metric == metric) return r.value;
    }
    return std::nullopt;
  }

  void write_csv(std::ostream& out) const {
    out << header << '\n';
    for (const auto& r : rows) {
      out << r.method << ',' << r.memory_bytes << ',' << r.param << ',' << r.metric << ','
          << detail::fmt_double(r.value) << ',' << r.seed << ',' << r.flows << ',' << r.packets << '\n';
    }
  }

  [[nodiscard]] std::string to_csv() const {
    std::ostringstream s;
    write_csv(s);
    return s.str();
  }
};

namespace detail {

struct RunParams {
  std::uint64_t switch_budget = 0;
  std::uint64_t sketch_bytes = 0;  // dcm and monitor-all; rule baselines derive theirs per switch
  std::optional<std::uint64_t> filter_bytes;
  bool counting = false;
};

struct RunOutcome {
  double overestimate_ratio = 0;
  bool saturated = false;
  std::uint64_t samples = 0;
  std::uint64_t wasted_samples = 0;
  std::uint64_t report_bytes = 0;
  std::uint64_t wasted_bytes = 0;
  std::uint64_t counted = 0;
  std::uint64_t wasted_counted = 0;
  std::uint64_t rule_bytes = 0;  // largest rule table over all switches
  std::uint64_t peak_memory = 0;
  std::uint64_t reconstructions = 0;
};

/// One end-to-end run: controller allocation, installs, per-epoch packet processing, reports.
class Simulation {
public:
  Simulation(const ExperimentConfig& cfg, const Topology& topo, const std::vector<FlowRecord>& flows,
             std::vector<std::vector<ActionId>> actions, CatalogPtr catalog, RunParams params)
      : cfg_(cfg), topo_(topo), flows_(flows), actions_(std::move(actions)), catalog_(std::move(catalog)),
        params_(params) {}

  RunOutcome run() {
    prepare();
    Epoch horizon = 0;
    for (const auto& f : flows_) horizon = std::max(horizon, f.end_epoch());
    std::map<Epoch, std::vector<std::size_t>> starts, ends;
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      if (actions_[i].empty()) continue;
      starts[flows_[i].start_epoch].push_back(i);
      ends[flows_[i].end_epoch()].push_back(i);
    }

    for (Epoch e = 0; e < horizon; ++e) {
      if (ctl_) {
        if (auto it = ends.find(e); it != ends.end()) {
          for (std::size_t i : it->second) ctl_->on_flow_end(flows_[i].key, e);
        }
        if (auto it = starts.find(e); it != starts.end()) {
          for (std::size_t i : it->second) admit(i, e);
        }
        if (cfg_.method.kind == MethodSpec::Kind::dcm) {
          for (auto& [sw, tsf] : ctl_->periodic_maintenance(e)) {
            const auto blob = tsf.serialize();
            switches_.at(sw).install_blob(blob, {});
          }
        } else {
          install_pending_rules();
        }
      }
      track_memory();
      forward(e);
      collect_reports();
    }
    return finish();
  }

private:
  void prepare() {
    if (flows_.size() != actions_.size()) throw error(errc::config_error, "one action list per flow required");
    paths_.reserve(flows_.size());
    std::map<std::pair<HostId, HostId>, Path> cache;
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      const auto& f = flows_[i];
      if (!topo_.has_host(f.src_host) || !topo_.has_host(f.dst_host))
        throw error(errc::config_error, "flow " + to_string(f.key) + " names a host missing from the topology");
      auto [it, fresh] = cache.try_emplace({f.src_host, f.dst_host});
      if (fresh) it->second = topo_.route(f.src_host, f.dst_host);
      paths_.push_back(it->second);
      if (!index_.emplace(f.key, i).second) throw error(errc::config_error, "duplicate flow " + to_string(f.key));
    }

    if (cfg_.method.kind != MethodSpec::Kind::monitor_all) {
      ControllerConfig cc;
      cc.adm_fp = cfg_.adm_fp;
      cc.act_fp = cfg_.act_fp;
      cc.period = cfg_.period;
      cc.check = cfg_.check;
      cc.rho = cfg_.rho;
      cc.default_count_rho = cfg_.count_rho;
      cc.default_sample_rho = cfg_.sample_rho;
      cc.filter_bytes = params_.filter_bytes;
      cc.seed = hashing::mix_seed(cfg_.seed, 1);
      try {
        ctl_.emplace(cc, catalog_);
      } catch (const error& e) {
        throw error(errc::config_error, e.what());
      }
      if (cfg_.audit) ctl_->set_audit(cfg_.audit);
    }

    SwitchConfig base;
    base.memory_budget = params_.switch_budget;
    base.sketch_bytes = params_.sketch_bytes;
    base.sketch_depth = cfg_.sketch_depth;
    base.seed = hashing::mix_seed(cfg_.seed, 2);
    base.packet_hash_seed = hashing::mix_seed(cfg_.seed, 3);
    const std::uint64_t empty_filter = TwoStageFilter().byte_size();
    const std::uint64_t min_sketch = 4 * cfg_.sketch_depth;

    std::map<SwitchId, std::uint64_t> rule_bound;
    if (cfg_.method.uses_rules() && params_.counting) {
      // Rules only ever grow during a run, so reserve room for every aggregate that crosses a switch.
      std::map<SwitchId, std::set<std::uint64_t>> aggs;
      for (std::size_t i = 0; i < flows_.size(); ++i) {
        if (actions_[i].empty()) continue;
        for (SwitchId s : paths_[i]) aggs[s].insert(aggregate_of(flows_[i].key));
      }
      for (const auto& [s, a] : aggs) rule_bound[s] = a.size();
    }

    for (SwitchId s : topo_.switches()) {
      SwitchConfig c = base;
      std::vector<WildcardRule> rules;
      if (params_.counting) {
        std::uint64_t reserved = 0;
        if (cfg_.method.kind == MethodSpec::Kind::monitor_all) reserved = empty_filter + c.rule_bytes;
        if (cfg_.method.uses_rules()) reserved = empty_filter + rule_bound[s] * c.rule_bytes;
        if (reserved > 0) {
          if (params_.switch_budget < reserved + min_sketch)
            throw error(errc::config_error, "switch " + std::to_string(s) + " budget of " +
                                                std::to_string(params_.switch_budget) + " bytes leaves no room for a sketch");
          c.sketch_bytes = params_.switch_budget - reserved;
        } else if (c.sketch_bytes < min_sketch) {
          throw error(errc::config_error, "sketch share below the minimum of " + std::to_string(min_sketch) + " bytes");
        }
      }
      if (cfg_.method.kind == MethodSpec::Kind::monitor_all) rules.push_back(match_all_rule(count_action));
      auto [it, ok] = switches_.try_emplace(s, s, c, catalog_);
      it->second.install(TwoStageFilter(), std::move(rules));
    }
  }

  [[nodiscard]] std::uint64_t aggregate_of(const FlowKey& f) const {
    const auto& m = cfg_.method;
    if (m.kind == MethodSpec::Kind::agg_ip) {
      const IpPrefix s{f.src_ip, m.src_mask};
      const IpPrefix d{f.dst_ip, m.dst_mask};
      return (std::uint64_t{f.src_ip & s.mask()} << 32) | (f.dst_ip & d.mask());
    }
    return HashPrefix::prefix_of(f, m.prefix_bits, agg_hash_seed());
  }

  [[nodiscard]] std::uint64_t agg_hash_seed() const { return hashing::mix_seed(cfg_.seed, 4); }

  [[nodiscard]] WildcardRule aggregate_rule(std::uint64_t agg, ActionId action) const {
    WildcardRule r;
    r.action = action;
    const auto& m = cfg_.method;
    if (m.kind == MethodSpec::Kind::agg_ip) {
      r.src = IpPrefix{static_cast<ipv4>(agg >> 32), m.src_mask};
      r.dst = IpPrefix{static_cast<ipv4>(agg & 0xffffffffu), m.dst_mask};
    } else {
      r.hash_prefix = HashPrefix{m.prefix_bits, agg, agg_hash_seed()};
    }
    return r;
  }

  void admit(std::size_t i, Epoch e) {
    const auto& f = flows_[i];
    const auto& acts = actions_[i];
    if (cfg_.method.kind == MethodSpec::Kind::dcm) {
      if (e == 0) {
        // The epoch-0 reconstruction installs these.
        for (ActionId a : acts) ctl_->register_flow(f.key, a, paths_[i], e);
        return;
      }
      for (auto& d : ctl_->on_new_flow(f.key, std::span<const ActionId>(acts), paths_[i], e)) {
        auto& sw = switches_.at(d.switch_id);
        if (d.kind == InstallKind::incremental) sw.insert_flow(d.flow, d.actions);
        else sw.install_blob(d.filter, {});
      }
      return;
    }
    for (ActionId a : acts) {
      const SwitchId s = ctl_->register_flow(f.key, a, paths_[i], e);
      const std::uint64_t agg = aggregate_of(f.key);
      if (rules_[s].emplace(std::pair{agg, a.value}, aggregate_rule(agg, a)).second) dirty_.insert(s);
    }
  }

  void install_pending_rules() {
    for (SwitchId s : dirty_) {
      std::vector<WildcardRule> rules;
      for (const auto& [k, r] : rules_[s]) rules.push_back(r);
      outcome_.rule_bytes = std::max<std::uint64_t>(outcome_.rule_bytes, rules.size() * switches_.at(s).config().rule_bytes);
      switches_.at(s).install(TwoStageFilter(), std::move(rules));
    }
    dirty_.clear();
  }

  void track_memory() {
    for (const auto& [s, sw] : switches_) outcome_.peak_memory = std::max(outcome_.peak_memory, sw.memory_used());
  }

  void forward(Epoch e) {
    const bool judged = ctl_.has_value();
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      const auto& f = flows_[i];
      const std::uint64_t n = f.packets_in_epoch(e);
      if (n == 0) continue;
      const auto first = static_cast<std::uint32_t>(f.packets_before(e));
      for (SwitchId s : paths_[i]) {
        switches_.at(s).process_packets(f.key, first, static_cast<std::uint32_t>(n), [&](const MonitorEvent& ev) {
          if (ev.kind != EventKind::counted || !judged) return;
          if (ctl_->is_assigned(ev.switch_id, ev.flow, ev.action)) {
            ++outcome_.counted;
            ++kept_[key_of(i, ev.action)];
          } else {
            ++outcome_.wasted_counted;
          }
        });
      }
    }
  }

  void collect_reports() {
    for (auto& [s, sw] : switches_) {
      if (sw.buffered_samples() == 0) continue;
      auto rep = sw.report();
      const std::uint64_t record = sw.config().sample_record_bytes;
      outcome_.samples += rep.samples.size();
      outcome_.report_bytes += rep.samples.size() * record;
      if (!ctl_) continue;
      auto d = ctl_->dedupe_reports(rep.samples);
      if (d.kept.size() + d.wasted.size() != rep.samples.size())
        throw std::logic_error("dedupe lost events");
      outcome_.wasted_samples += d.wasted.size();
      outcome_.wasted_bytes += d.wasted.size() * record;
      for (const auto& ev : d.kept) ++kept_[key_of(index_.at(ev.flow), ev.action)];
    }
  }

  static std::uint64_t key_of(std::size_t flow, ActionId a) { return (std::uint64_t{flow} << 8) | (a.value & 0xff); }

  RunOutcome finish() {
    if (ctl_) {
      outcome_.reconstructions = ctl_->reconstruction_count();
      check_coverage();
    }
    if (params_.counting) {
      double sum = 0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < flows_.size(); ++i) {
        if (actions_[i].empty()) continue;
        const double truth = static_cast<double>(flows_[i].packets);
        double est = 0;
        if (cfg_.method.kind == MethodSpec::Kind::monitor_all) {
          for (SwitchId s : paths_[i]) est += static_cast<double>(switches_.at(s).sketch(count_action)->query(flows_[i].key));
          est /= static_cast<double>(paths_[i].size());
        } else {
          const SwitchId s = ctl_->task(flows_[i].key, count_action).assigned;
          const auto* sk = switches_.at(s).sketch(count_action);
          if (sk == nullptr) throw std::logic_error("assigned switch has no sketch");
          est = static_cast<double>(sk->query(flows_[i].key));
        }
        if (est < truth) throw std::logic_error("sketch underestimated flow " + to_string(flows_[i].key));
        sum += (est - truth) / truth;
        ++n;
      }
      outcome_.overestimate_ratio = n == 0 ? 0.0 : sum / static_cast<double>(n);
      for (const auto& [s, sw] : switches_) {
        for (const auto& [a, sk] : sw.sketches()) outcome_.saturated = outcome_.saturated || sk.saturated();
      }
    }
    if (cfg_.on_filters) {
      std::map<SwitchId, TwoStageFilter> filters;
      for (const auto& [s, sw] : switches_) filters.emplace(s, sw.filter());
      cfg_.on_filters(filters);
    }
    return outcome_;
  }

  // Every assigned (flow, action) must have been observed exactly as often as an ideal monitor would
  // see it: all packets for counting, every hash-selected packet for sampling.
  void check_coverage() const {
    const std::uint64_t hash_seed = switches_.begin()->second.config().packet_hash_seed;
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      const auto& acts = actions_[i];
      if (acts.empty()) continue;
      const auto& f = flows_[i];
      std::vector<std::uint64_t> expect(acts.size(), 0);
      bool any_sampling = false;
      for (std::size_t j = 0; j < acts.size(); ++j) {
        if (catalog_->at(acts[j]).is_sampling()) any_sampling = true;
        else expect[j] = f.packets;
      }
      if (any_sampling) {
        for (std::uint64_t o = 0; o < f.packets; ++o) {
          const double h = packet_hash(PacketId{f.key, static_cast<std::uint32_t>(o)}, hash_seed);
          for (std::size_t j = 0; j < acts.size(); ++j) {
            const auto& spec = catalog_->at(acts[j]);
            if (spec.is_sampling() && spec.selects(h)) ++expect[j];
          }
        }
      }
      for (std::size_t j = 0; j < acts.size(); ++j) {
        auto it = kept_.find(key_of(i, acts[j]));
        const std::uint64_t got = it == kept_.end() ? 0 : it->second;
        if (got != expect[j])
          throw std::logic_error("coverage violated for " + to_string(f.key) + " / " + to_string(acts[j]) + ": kept " +
                                 std::to_string(got) + ", expected " + std::to_string(expect[j]));
      }
    }
  }

  const ExperimentConfig& cfg_;
  const Topology& topo_;
  const std::vector<FlowRecord>& flows_;
  std::vector<std::vector<ActionId>> actions_;
  CatalogPtr catalog_;
  RunParams params_;

  std::vector<Path> paths_;
  std::unordered_map<FlowKey, std::size_t> index_;
  std::optional<ControllerState> ctl_;
  std::map<SwitchId, SwitchState> switches_;
  std::map<SwitchId, std::map<std::pair<std::uint64_t, std::uint32_t>, WildcardRule>> rules_;
  std::set<SwitchId> dirty_;
  std::unordered_map<std::uint64_t, std::uint64_t> kept_;
  RunOutcome outcome_;
};

struct Workload {
  Topology topology;
  std::vector<FlowRecord> flows;
  std::uint64_t packets = 0;
};

inline Workload load_workload(const ExperimentConfig& cfg) {
  Workload w{cfg.topology_override ? *cfg.topology_override : parse_topology(cfg.topology), {}, 0};
  if (cfg.trace_override) {
    w.flows = *cfg.trace_override;
  } else {
    const auto src = parse_trace_source(cfg.trace, cfg.seed);
    if (src.file) {
      w.flows = trace_load_csv(*src.file);
    } else {
      try {
        w.flows = trace_synthesize(w.topology, src.synth);
      } catch (const error& e) {
        throw error(errc::config_error, e.what());
      }
    }
  }
  for (const auto& f : w.flows) w.packets += f.packets;
  return w;
}

inline void validate_common(const ExperimentConfig& cfg) {
  if (cfg.memory.empty()) throw error(errc::config_error, "at least one memory budget is required");
  for (auto m : cfg.memory) {
    if (m == 0) throw error(errc::config_error, "memory budget must be > 0");
  }
  if (cfg.sketch_depth == 0) throw error(errc::config_error, "sketch depth must be >= 1");
}

inline ReportRow make_row(const ExperimentConfig& cfg, const Workload& w, std::uint64_t memory, std::string param,
                          std::string metric, double value) {
  if (!std::isfinite(value) || value < 0) throw std::logic_error("metric " + metric + " is not a finite non-negative number");
  return ReportRow{to_string(cfg.method), memory, std::move(param), std::move(metric), value, cfg.seed, w.flows.size(), w.packets};
}

inline std::string mask_param(const MethodSpec& m) {
  switch (m.kind) {
    case MethodSpec::Kind::agg_ip: return "masks=" + std::to_string(m.src_mask) + "/" + std::to_string(m.dst_mask);
    case MethodSpec::Kind::agg_hash: return "prefix_bits=" + std::to_string(m.prefix_bits);
    default: return "-";
  }
}

inline double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Flow-size counting: every flow is counted; the metric is the mean relative overestimate of the
/// Count-Min estimate. DCM reads each flow from its assigned switch; Monitor-All averages the
/// estimates of all switches on the path.
inline ExperimentReport run_flow_count(const ExperimentConfig& cfg) {
  detail::validate_common(cfg);
  const auto w = detail::load_workload(cfg);
  auto catalog = std::make_shared<const ActionCatalog>(ActionCatalog::standard());
  const std::vector<std::vector<ActionId>> actions(w.flows.size(), std::vector<ActionId>{count_action});

  ExperimentReport rep;
  auto emit = [&](std::uint64_t memory, const std::string& param, const detail::RunOutcome& o) {
    rep.rows.push_back(detail::make_row(cfg, w, memory, param, "overestimate_ratio", o.overestimate_ratio));
    rep.rows.push_back(detail::make_row(cfg, w, memory, param, "sketch_saturated", o.saturated ? 1.0 : 0.0));
  };
  for (std::uint64_t memory : cfg.memory) {
    if (cfg.method.kind == MethodSpec::Kind::dcm) {
      if (cfg.bf_fraction.empty()) throw error(errc::config_error, "dcm counting needs at least one bf fraction");
      for (double f : cfg.bf_fraction) {
        if (!(f > 0 && f < 1)) throw error(errc::config_error, "bf fraction must lie in (0, 1)");
        detail::RunParams p;
        p.counting = true;
        p.switch_budget = memory;
        p.filter_bytes = static_cast<std::uint64_t>(std::floor(f * static_cast<double>(memory)));
        if (*p.filter_bytes == 0) throw error(errc::config_error, "bf fraction leaves no filter memory");
        p.sketch_bytes = memory - *p.filter_bytes;
        const auto o = detail::Simulation(cfg, w.topology, w.flows, actions, catalog, p).run();
        emit(memory, "bf_fraction=" + detail::fmt_double(f), o);
      }
    } else {
      detail::RunParams p;
      p.counting = true;
      p.switch_budget = memory;
      const auto o = detail::Simulation(cfg, w.topology, w.flows, actions, catalog, p).run();
      emit(memory, detail::mask_param(cfg.method), o);
    }
  }
  return rep;
}

/// Single-rate sampling: flows carrying a rate are sampled at that (global) rate; flows without one
/// are background traffic. The metric is the report traffic spent on samples the controller discards.
/// For DCM the memory sweep sets the per-switch filter bytes; rule baselines report the rule memory
/// they ended up using instead.
inline ExperimentReport run_single_rate(const ExperimentConfig& cfg) {
  detail::validate_common(cfg);
  if (cfg.method.kind == MethodSpec::Kind::monitor_all)
    throw error(errc::config_error, "monitor-all has no sampling variant");
  const auto w = detail::load_workload(cfg);
  std::optional<SampleRate> rate;
  std::vector<std::vector<ActionId>> actions(w.flows.size());
  for (std::size_t i = 0; i < w.flows.size(); ++i) {
    const auto& r = w.flows[i].sample_rate;
    if (!r) continue;
    if (rate && r->value() != rate->value())
      throw error(errc::config_error, "single-rate study needs one global rate; found " + to_string(*rate) + " and " +
                                          to_string(*r));
    rate = *r;
    actions[i].push_back(fixed_rate_action);
  }
  auto catalog = std::make_shared<const ActionCatalog>(rate ? ActionCatalog::with_fixed_rate(*rate) : ActionCatalog::standard());

  ExperimentReport rep;
  auto emit = [&](std::uint64_t memory, const std::string& param, const detail::RunOutcome& o) {
    rep.rows.push_back(detail::make_row(cfg, w, memory, param, "wasted_bytes", static_cast<double>(o.wasted_bytes)));
    rep.rows.push_back(detail::make_row(cfg, w, memory, param, "report_bytes", static_cast<double>(o.report_bytes)));
    rep.rows.push_back(detail::make_row(cfg, w, memory, param, "wasted_ratio", detail::ratio(o.wasted_bytes, o.report_bytes)));
  };
  if (cfg.method.kind == MethodSpec::Kind::dcm) {
    for (std::uint64_t memory : cfg.memory) {
      detail::RunParams p;
      p.switch_budget = memory;
      p.filter_bytes = memory;
      emit(memory, "-", detail::Simulation(cfg, w.topology, w.flows, actions, catalog, p).run());
    }
  } else {
    const auto o = detail::Simulation(cfg, w.topology, w.flows, actions, catalog, detail::RunParams{}).run();
    emit(o.rule_bytes, detail::mask_param(cfg.method), o);
  }
  return rep;
}

/// Multi-rate sampling: every flow gets its own random rate at each precision, split into dyadic
/// interval actions. The metric is the fraction of all samples that the controller discards.
inline ExperimentReport run_multi_rate(const ExperimentConfig& cfg) {
  detail::validate_common(cfg);
  if (cfg.method.kind != MethodSpec::Kind::dcm) throw error(errc::config_error, "the multi-rate study runs dcm only");
  if (cfg.precision.empty()) throw error(errc::config_error, "at least one precision is required");
  const auto w = detail::load_workload(cfg);
  auto catalog = std::make_shared<const ActionCatalog>(ActionCatalog::standard());

  ExperimentReport rep;
  for (unsigned bits : cfg.precision) {
    if (bits < 1 || bits > max_sample_interval) throw error(errc::config_error, "precision must lie in [1, 32]");
    std::mt19937_64 rng(hashing::mix_seed(cfg.seed, 0x5000 + bits));
    const std::uint64_t span = (std::uint64_t{1} << bits) - 1;
    std::vector<std::vector<ActionId>> actions(w.flows.size());
    for (std::size_t i = 0; i < w.flows.size(); ++i) {
      const SampleRate r(1 + rng() % span, bits);
      for (unsigned b : rate_to_actions(r)) actions[i].push_back(interval_action(b));
    }
    const std::string param = "precision=" + std::to_string(bits);
    for (std::uint64_t memory : cfg.memory) {
      detail::RunParams p;
      p.switch_budget = memory;
      p.filter_bytes = memory;
      const auto o = detail::Simulation(cfg, w.topology, w.flows, actions, catalog, p).run();
      rep.rows.push_back(detail::make_row(cfg, w, memory, param, "wasted_sample_ratio", detail::ratio(o.wasted_samples, o.samples)));
      rep.rows.push_back(detail::make_row(cfg, w, memory, param, "samples", static_cast<double>(o.samples)));
      rep.rows.push_back(detail::make_row(cfg, w, memory, param, "wasted_samples", static_cast<double>(o.wasted_samples)));
    }
  }
  return rep;
}

}  // namespace dcm
