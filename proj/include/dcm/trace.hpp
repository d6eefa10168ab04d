#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dcm/error.hpp"
#include "dcm/flow_key.hpp"
#include "dcm/sampling.hpp"
#include "dcm/topology.hpp"
#include "dcm/types.hpp"

namespace dcm {

struct FlowRecord {
  FlowKey key;
  std::uint64_t packets = 1;
  HostId src_host = 0;
  HostId dst_host = 0;
  Epoch start_epoch = 0;
  Epoch duration_epochs = 1;
  std::optional<SampleRate> sample_rate;

  [[nodiscard]] Epoch end_epoch() const noexcept { return start_epoch + duration_epochs; }

  // ceil(packets / duration) per live epoch; the tail epochs carry whatever is left.
  [[nodiscard]] std::uint64_t packets_in_epoch(Epoch e) const noexcept {
    if (e < start_epoch || e >= end_epoch()) return 0;
    const std::uint64_t per = (packets + duration_epochs - 1) / duration_epochs;
    const std::uint64_t sent = per * (e - start_epoch);
    if (sent >= packets) return 0;
    return std::min(per, packets - sent);
  }
  [[nodiscard]] std::uint64_t packets_before(Epoch e) const noexcept {
    if (e <= start_epoch) return 0;
    const std::uint64_t per = (packets + duration_epochs - 1) / duration_epochs;
    return std::min(packets, per * (e - start_epoch));
  }
};

struct SizeDistribution {
  enum class Kind { zipf, pareto, uniform };
  Kind kind = Kind::zipf;
  double a = 1.0;  // zipf: alpha; pareto: shape; uniform: lo
  double b = 1.0;  // pareto: scale; uniform: hi

  static SizeDistribution zipf(double alpha) { return {Kind::zipf, alpha, 0}; }
  static SizeDistribution pareto(double shape, double scale) { return {Kind::pareto, shape, scale}; }
  static SizeDistribution uniform(std::uint64_t lo, std::uint64_t hi) {
    return {Kind::uniform, static_cast<double>(lo), static_cast<double>(hi)};
  }
};

struct TraceSpec {
  std::size_t flows = 1000;
  SizeDistribution size = SizeDistribution::zipf(1.0);
  std::uint64_t seed = 1;
  Epoch epochs = 50;
  // Fraction of flows that carry `rate`; the rest are counting-only background flows.
  double targeted_fraction = 1.0;
  std::optional<SampleRate> rate;
};

namespace detail {

// Raw mt19937_64 output only: the standard library's distributions are not reproducible across
// implementations.
class trace_rng {
public:
  explicit trace_rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t next() { return gen_(); }
  // [0, 1)
  double unit() { return static_cast<double>(next() >> 11) * 0x1p-53; }
  // [lo, hi]
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    const std::uint64_t span = hi - lo + 1;
    return span == 0 ? next() : lo + next() % span;
  }

private:
  std::mt19937_64 gen_;
};

inline std::uint64_t draw_size(const SizeDistribution& d, trace_rng& rng) {
  constexpr double cap = 1e9;
  switch (d.kind) {
    case SizeDistribution::Kind::zipf: {
      // Size of a randomly chosen flow in a population whose rank-size curve is size ~ rank^-alpha.
      const double u = 1.0 - rng.unit();
      return static_cast<std::uint64_t>(std::min(cap, std::ceil(std::pow(u, -d.a))));
    }
    case SizeDistribution::Kind::pareto: {
      const double u = 1.0 - rng.unit();
      return static_cast<std::uint64_t>(std::clamp(std::ceil(d.b * std::pow(u, -1.0 / d.a)), 1.0, cap));
    }
    case SizeDistribution::Kind::uniform:
      return rng.between(static_cast<std::uint64_t>(d.a), static_cast<std::uint64_t>(d.b));
  }
  return 1;
}

}  // namespace detail

/// Deterministic synthetic trace: unique 5-tuples between uniformly drawn distinct hosts, ports in
/// [1024, 65535], TCP:UDP 9:1, start epochs uniform over the run and durations that end within it.
inline std::vector<FlowRecord> trace_synthesize(const Topology& topo, const TraceSpec& spec) {
  if (spec.flows == 0) throw error(errc::invalid_parameter, "trace needs >= 1 flow");
  if (spec.epochs == 0) throw error(errc::invalid_parameter, "trace needs >= 1 epoch");
  if (!(spec.targeted_fraction >= 0.0 && spec.targeted_fraction <= 1.0))
    throw error(errc::invalid_parameter, "targeted fraction must lie in [0, 1]");
  switch (spec.size.kind) {
    case SizeDistribution::Kind::zipf:
      if (!(spec.size.a > 0)) throw error(errc::invalid_parameter, "zipf alpha must be > 0");
      break;
    case SizeDistribution::Kind::pareto:
      if (!(spec.size.a > 0 && spec.size.b > 0)) throw error(errc::invalid_parameter, "pareto shape and scale must be > 0");
      break;
    case SizeDistribution::Kind::uniform:
      if (!(spec.size.a >= 1 && spec.size.b >= spec.size.a)) throw error(errc::invalid_parameter, "uniform sizes need 1 <= lo <= hi");
      break;
  }
  const auto hosts = topo.hosts();
  if (hosts.empty()) throw error(errc::invalid_parameter, "topology has no hosts");

  detail::trace_rng rng(spec.seed);
  std::unordered_set<FlowKey> seen;
  std::vector<FlowRecord> out;
  out.reserve(spec.flows);
  for (std::size_t i = 0; i < spec.flows; ++i) {
    FlowRecord r;
    r.src_host = hosts[rng.between(0, hosts.size() - 1)];
    r.dst_host = r.src_host;
    if (hosts.size() > 1) {
      while (r.dst_host == r.src_host) r.dst_host = hosts[rng.between(0, hosts.size() - 1)];
    }
    r.key.src_ip = Topology::host_ip(r.src_host);
    r.key.dst_ip = Topology::host_ip(r.dst_host);
    r.key.protocol = rng.between(0, 9) == 0 ? 17 : 6;
    do {
      r.key.src_port = static_cast<std::uint16_t>(rng.between(1024, 65535));
      r.key.dst_port = static_cast<std::uint16_t>(rng.between(1024, 65535));
    } while (!seen.insert(r.key).second);
    r.packets = std::max<std::uint64_t>(1, detail::draw_size(spec.size, rng));
    r.start_epoch = rng.between(0, spec.epochs - 1);
    r.duration_epochs = rng.between(1, spec.epochs - r.start_epoch);
    const bool targeted = rng.unit() < spec.targeted_fraction;
    if (targeted && spec.rate) r.sample_rate = spec.rate;
    out.push_back(r);
  }
  return out;
}

inline constexpr std::string_view trace_csv_header =
    "src_ip,dst_ip,src_port,dst_port,protocol,packets,src_host,dst_host,start_epoch,duration_epochs,rate_num,rate_bits";

inline void trace_write_csv(std::ostream& out, const std::vector<FlowRecord>& records) {
  out << trace_csv_header << '\n';
  for (const auto& r : records) {
    out << format_ipv4(r.key.src_ip) << ',' << format_ipv4(r.key.dst_ip) << ',' << r.key.src_port << ','
        << r.key.dst_port << ',' << unsigned{r.key.protocol} << ',' << r.packets << ',' << r.src_host << ','
        << r.dst_host << ',' << r.start_epoch << ',' << r.duration_epochs << ',';
    if (r.sample_rate) out << r.sample_rate->numerator << ',' << r.sample_rate->precision_bits;
    else out << ',';
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::uint64_t csv_uint(std::string_view tok, std::size_t line, std::string_view column, std::uint64_t max) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
    throw parse_error(line, std::string(column), "expected a decimal integer, got '" + std::string(tok) + "'");
  if (v > max) throw parse_error(line, std::string(column), "value " + std::string(tok) + " out of range");
  return v;
}

}  // namespace detail

/// Reads the trace CSV; the two rate columns are optional in the header and may be left empty per row.
inline std::vector<FlowRecord> trace_parse_csv(std::istream& in) {
  static constexpr std::string_view names[] = {"src_ip",     "dst_ip",   "src_port",    "dst_port",
                                               "protocol",   "packets",  "src_host",    "dst_host",
                                               "start_epoch", "duration_epochs", "rate_num", "rate_bits"};
  std::string raw;
  std::size_t line = 0;
  if (!std::getline(in, raw)) throw parse_error(1, "", "missing header");
  ++line;
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();
  const auto header = detail::split_csv(raw);
  if (header.size() != 10 && header.size() != 12) throw parse_error(line, "", "header must have 10 or 12 columns");
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != names[i])
      throw parse_error(line, std::string(names[i]), "unexpected header column '" + std::string(header[i]) + "'");
  }

  std::vector<FlowRecord> out;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    const auto cols = detail::split_csv(raw);
    if (cols.size() != header.size())
      throw parse_error(line, "", "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cols.size()));
    FlowRecord r;
    auto ip = [&](std::size_t i) {
      auto v = parse_ipv4(cols[i]);
      if (!v) throw parse_error(line, std::string(names[i]), "bad dotted-quad '" + std::string(cols[i]) + "'");
      return *v;
    };
    r.key.src_ip = ip(0);
    r.key.dst_ip = ip(1);
    r.key.src_port = static_cast<std::uint16_t>(detail::csv_uint(cols[2], line, names[2], 65535));
    r.key.dst_port = static_cast<std::uint16_t>(detail::csv_uint(cols[3], line, names[3], 65535));
    r.key.protocol = static_cast<std::uint8_t>(detail::csv_uint(cols[4], line, names[4], 255));
    r.packets = detail::csv_uint(cols[5], line, names[5], UINT64_MAX);
    if (r.packets == 0) throw parse_error(line, "packets", "packets must be >= 1");
    r.src_host = static_cast<HostId>(detail::csv_uint(cols[6], line, names[6], UINT32_MAX));
    r.dst_host = static_cast<HostId>(detail::csv_uint(cols[7], line, names[7], UINT32_MAX));
    r.start_epoch = detail::csv_uint(cols[8], line, names[8], UINT64_MAX);
    r.duration_epochs = detail::csv_uint(cols[9], line, names[9], UINT64_MAX);
    if (r.duration_epochs == 0) throw parse_error(line, "duration_epochs", "duration must be >= 1 epoch");
    if (cols.size() == 12 && (!cols[10].empty() || !cols[11].empty())) {
      if (cols[10].empty()) throw parse_error(line, "rate_num", "rate_num missing while rate_bits is set");
      if (cols[11].empty()) throw parse_error(line, "rate_bits", "rate_bits missing while rate_num is set");
      const auto num = detail::csv_uint(cols[10], line, names[10], UINT64_MAX);
      const auto bits = detail::csv_uint(cols[11], line, names[11], 32);
      try {
        r.sample_rate = SampleRate(num, static_cast<unsigned>(bits));
      } catch (const error& e) {
        throw parse_error(line, "rate_num", e.what());
      }
    }
    out.push_back(r);
  }
  return out;
}

inline std::vector<FlowRecord> trace_load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error(0, "", "cannot open trace file '" + path + "'");
  return trace_parse_csv(in);
}

}  // namespace dcm
