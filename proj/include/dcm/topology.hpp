#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/types.hpp"

namespace dcm {

enum class TopologyKind { star, fat_tree, edge_list };

/// Undirected switch graph plus host attachments. Hosts hang off exactly one switch and get the
/// address 10.0.0.0 + id + 1.
class Topology {
public:
  explicit Topology(TopologyKind kind = TopologyKind::edge_list) : kind_(kind) {}

  void add_switch(SwitchId s) { adj_.try_emplace(s); }

  void add_host(HostId h, SwitchId s) {
    if (!adj_.contains(s)) throw error(errc::invalid_parameter, "host " + std::to_string(h) + " attaches to unknown switch " + std::to_string(s));
    if (h >= (1u << 24) - 2) throw error(errc::invalid_parameter, "host id too large for the 10.0.0.0/8 plan");
    if (!hosts_.emplace(h, s).second) throw error(errc::invalid_parameter, "duplicate host " + std::to_string(h));
  }

  void add_link(SwitchId a, SwitchId b) {
    if (!adj_.contains(a) || !adj_.contains(b))
      throw error(errc::invalid_parameter, "link " + std::to_string(a) + "-" + std::to_string(b) + " names an unknown switch");
    if (a == b) return;
    auto link = [](std::vector<SwitchId>& v, SwitchId x) {
      auto it = std::lower_bound(v.begin(), v.end(), x);
      if (it == v.end() || *it != x) v.insert(it, x);
    };
    link(adj_[a], b);
    link(adj_[b], a);
  }

  // Throws unless the switch graph is connected and non-empty.
  void validate() const {
    if (adj_.empty()) throw error(errc::invalid_parameter, "topology has no switches");
    std::set<SwitchId> seen{adj_.begin()->first};
    std::deque<SwitchId> q{adj_.begin()->first};
    while (!q.empty()) {
      const SwitchId s = q.front();
      q.pop_front();
      for (SwitchId n : adj_.at(s)) {
        if (seen.insert(n).second) q.push_back(n);
      }
    }
    if (seen.size() != adj_.size()) throw error(errc::invalid_parameter, "topology is not connected");
  }

  [[nodiscard]] TopologyKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::vector<SwitchId> switches() const {
    std::vector<SwitchId> out;
    out.reserve(adj_.size());
    for (const auto& [s, n] : adj_) out.push_back(s);
    return out;
  }
  [[nodiscard]] std::vector<HostId> hosts() const {
    std::vector<HostId> out;
    out.reserve(hosts_.size());
    for (const auto& [h, s] : hosts_) out.push_back(h);
    return out;
  }
  [[nodiscard]] std::size_t switch_count() const noexcept { return adj_.size(); }
  [[nodiscard]] std::size_t host_count() const noexcept { return hosts_.size(); }
  [[nodiscard]] std::size_t link_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& [s, n] : adj_) twice += n.size();
    return twice / 2;
  }
  [[nodiscard]] bool has_host(HostId h) const noexcept { return hosts_.contains(h); }
  [[nodiscard]] SwitchId attachment(HostId h) const {
    auto it = hosts_.find(h);
    if (it == hosts_.end()) throw error(errc::invalid_parameter, "unknown host " + std::to_string(h));
    return it->second;
  }
  [[nodiscard]] const std::vector<SwitchId>& neighbors(SwitchId s) const { return adj_.at(s); }

  static ipv4 host_ip(HostId h) noexcept { return 0x0A000000u + h + 1; }

  // Shortest switch path between the hosts' attachment switches; among equal-length paths the
  // lexicographically smallest id sequence wins.
  [[nodiscard]] Path route(HostId src, HostId dst) const { return route_switches(attachment(src), attachment(dst)); }

  [[nodiscard]] Path route_switches(SwitchId from, SwitchId to) const {
    if (!adj_.contains(from) || !adj_.contains(to)) throw error(errc::invalid_parameter, "route between unknown switches");
    constexpr auto inf = std::numeric_limits<std::size_t>::max();
    std::map<SwitchId, std::size_t> dist;
    dist[to] = 0;
    std::deque<SwitchId> q{to};
    while (!q.empty()) {
      const SwitchId s = q.front();
      q.pop_front();
      for (SwitchId n : adj_.at(s)) {
        if (dist.try_emplace(n, dist[s] + 1).second) q.push_back(n);
      }
    }
    if (!dist.contains(from)) throw error(errc::unreachable, std::to_string(from) + " -> " + std::to_string(to));
    Path path{from};
    SwitchId cur = from;
    while (cur != to) {
      const std::size_t want = dist[cur] - 1;
      SwitchId next = cur;
      for (SwitchId n : adj_.at(cur)) {
        auto it = dist.find(n);
        if (it != dist.end() && it->second == want) {
          next = n;
          break;  // neighbors are sorted, so the first hit is the smallest id
        }
      }
      if (next == cur || want == inf) throw error(errc::unreachable, "broken distance field");
      path.push_back(next);
      cur = next;
    }
    return path;
  }

private:
  TopologyKind kind_;
  std::map<SwitchId, std::vector<SwitchId>> adj_;
  std::map<HostId, SwitchId> hosts_;
};

/// Star: every edge switch links to every core. Cores take ids [0, cores), edges follow.
inline Topology topo_star(std::size_t cores, std::size_t edge_switches, std::size_t hosts_per_edge) {
  if (cores == 0 || edge_switches == 0 || hosts_per_edge == 0)
    throw error(errc::invalid_parameter, "star topology counts must be >= 1");
  Topology t(TopologyKind::star);
  const auto nsw = static_cast<SwitchId>(cores + edge_switches);
  for (SwitchId s = 0; s < nsw; ++s) t.add_switch(s);
  HostId h = 0;
  for (std::size_t e = 0; e < edge_switches; ++e) {
    const auto es = static_cast<SwitchId>(cores + e);
    for (std::size_t c = 0; c < cores; ++c) t.add_link(es, static_cast<SwitchId>(c));
    for (std::size_t i = 0; i < hosts_per_edge; ++i) t.add_host(h++, es);
  }
  t.validate();
  return t;
}

/// k-ary fat-tree: (k/2)^2 cores at ids [0, (k/2)^2), then per pod k/2 aggregation switches followed by
/// k/2 edge switches. Aggregation switch j of every pod uplinks to cores j*k/2 .. j*k/2 + k/2 - 1.
inline Topology topo_fat_tree(std::size_t k) {
  if (k < 2 || k % 2 != 0) throw error(errc::invalid_parameter, "fat-tree arity must be even and >= 2");
  const std::size_t half = k / 2;
  const std::size_t cores = half * half;
  Topology t(TopologyKind::fat_tree);
  const auto nsw = static_cast<SwitchId>(cores + k * k);
  for (SwitchId s = 0; s < nsw; ++s) t.add_switch(s);
  HostId h = 0;
  for (std::size_t pod = 0; pod < k; ++pod) {
    const std::size_t base = cores + pod * k;
    for (std::size_t j = 0; j < half; ++j) {
      const auto agg = static_cast<SwitchId>(base + j);
      for (std::size_t i = 0; i < half; ++i) t.add_link(agg, static_cast<SwitchId>(j * half + i));
    }
    for (std::size_t j = 0; j < half; ++j) {
      const auto edge = static_cast<SwitchId>(base + half + j);
      for (std::size_t a = 0; a < half; ++a) t.add_link(edge, static_cast<SwitchId>(base + a));
      for (std::size_t i = 0; i < half; ++i) t.add_host(h++, edge);
    }
  }
  t.validate();
  return t;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::uint32_t parse_id(std::string_view tok, std::size_t line, const char* what) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw parse_error(line, what, "expected a non-negative integer id, got '" + std::string(tok) + "'");
  return v;
}

}  // namespace detail

/// Edge-list format: '#' comments, and lines `switch <id>`, `host <id> <switch-id>`, `link <id> <id>`.
inline Topology topo_parse(std::istream& in) {
  Topology t(TopologyKind::edge_list);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view sv(raw);
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    const auto tok = detail::split_ws(sv);
    if (tok.empty()) continue;
    try {
      if (tok[0] == "switch" && tok.size() == 2) {
        t.add_switch(detail::parse_id(tok[1], line, "switch id"));
      } else if (tok[0] == "host" && tok.size() == 3) {
        t.add_host(detail::parse_id(tok[1], line, "host id"), detail::parse_id(tok[2], line, "switch id"));
      } else if (tok[0] == "link" && tok.size() == 3) {
        t.add_link(detail::parse_id(tok[1], line, "switch id"), detail::parse_id(tok[2], line, "switch id"));
      } else {
        throw parse_error(line, "", "expected 'switch <id>', 'host <id> <switch>' or 'link <a> <b>'");
      }
    } catch (const parse_error&) {
      throw;
    } catch (const error& e) {
      throw parse_error(line, "", e.what());
    }
  }
  try {
    t.validate();
  } catch (const error& e) {
    throw parse_error(line, "", e.what());
  }
  return t;
}

inline Topology topo_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(0, "", "cannot open topology file '" + path + "'");
  return topo_parse(in);
}

inline void topo_write(std::ostream& out, const Topology& t) {
  out << "# dcm topology edge list\n";
  for (SwitchId s : t.switches()) out << "switch " << s << '\n';
  for (HostId h : t.hosts()) out << "host " << h << ' ' << t.attachment(h) << '\n';
  for (SwitchId s : t.switches()) {
    for (SwitchId n : t.neighbors(s)) {
      if (s < n) out << "link " << s << ' ' << n << '\n';
    }
  }
}

}  // namespace dcm
