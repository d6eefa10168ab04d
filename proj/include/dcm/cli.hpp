#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcm/error.hpp"
#include "dcm/experiments.hpp"

namespace dcm {

namespace detail {

template <typename T>
std::vector<T> parse_list(const std::string& s, std::string_view what) {
  std::vector<T> out;
  for (auto tok : split(s, ',')) out.push_back(spec_number<T>(tok, what));
  return out;
}

// count=<n>, sample=<n> (every sampling action) or <action id>=<n>
inline void parse_rho(const std::string& s, ExperimentConfig& cfg) {
  for (auto item : split(s, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw error(errc::config_error, "--rho expects action=count pairs");
    const auto key = item.substr(0, eq);
    const auto n = spec_number<std::uint64_t>(item.substr(eq + 1), "rho");
    if (n == 0) throw error(errc::config_error, "rho must be >= 1");
    if (key == "count") cfg.count_rho = n;
    else if (key == "sample") cfg.sample_rho = n;
    else cfg.rho[ActionId{spec_number<std::uint32_t>(key, "rho action id")}] = n;
  }
}

// "DCMD", switch count u32, then per switch: id u32, blob length u64, two-stage filter blob.
inline void write_filter_dump(const std::string& path, const std::map<SwitchId, TwoStageFilter>& filters) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(errc::config_error, "cannot write '" + path + "'");
  auto put = [&out](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  out.write("DCMD", 4);
  put(filters.size(), 4);
  for (const auto& [s, f] : filters) {
    const auto blob = f.serialize();
    put(s, 4);
    put(blob.size(), 8);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
}

}  // namespace detail

/// Entry point of dcm-sim. Exit codes: 0 success, 1 internal invariant failure, 2 configuration error,
/// 3 parse error.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Distributed collaborative monitoring simulator"};
  app.require_subcommand(1);

  std::string topo = "star:2,4,8";
  std::string trace = "synth:flows=10000";
  std::string method = "dcm";
  std::string memory = "1048576";
  std::string bf_fraction = "0.05";
  std::string precision = "6,8,10";
  std::string rho;
  std::string out_path, audit_path, dump_path;
  ExperimentConfig cfg;

  std::string which;
  for (const char* name : {"count", "single-rate", "multi-rate"}) {
    auto* sub = app.add_subcommand(name, std::string(name) + " study");
    sub->callback([&which, name] { which = name; });
    sub->add_option("--topo", topo, "star:<cores>,<edges>,<hosts> | fat-tree:<k> | file:<path>");
    sub->add_option("--trace", trace, "file:<path> | synth:flows=N,dist=zipf:1.0,epochs=E,targeted=F,rate_num=N,rate_bits=B,seed=S");
    sub->add_option("--method", method, "dcm | monitor-all | agg-ip:<s>,<d> | agg-hash:<bits>");
    sub->add_option("--memory", memory, "bytes per switch, comma separated sweep");
    sub->add_option("--bf-fraction", bf_fraction, "filter share of memory (dcm counting), comma separated");
    sub->add_option("--precision", precision, "rate precision bits (multi-rate), comma separated");
    sub->add_option("--rho", rho, "per-action thresholds: count=N,sample=N,<action id>=N");
    sub->add_option("--period", cfg.period, "full reconstruction period T in epochs");
    sub->add_option("--check", cfg.check, "fp check period T' in epochs");
    sub->add_option("--adm-fp", cfg.adm_fp, "admission filter fp target");
    sub->add_option("--act-fp", cfg.act_fp, "action filter fp target");
    sub->add_option("--sketch-depth", cfg.sketch_depth, "Count-Min rows");
    sub->add_option("--seed", cfg.seed, "run seed");
    sub->add_option("--out", out_path, "CSV output path (default stdout)");
    sub->add_option("--audit", audit_path, "JSON-lines controller audit log");
    sub->add_option("--dump-filters", dump_path, "write the final filters of the last run");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "dcm-sim: " << e.what() << '\n';
    return 2;
  }

  try {
    cfg.topology = topo;
    cfg.trace = trace;
    cfg.method = parse_method(method);
    cfg.memory = detail::parse_list<std::uint64_t>(memory, "memory");
    cfg.bf_fraction = detail::parse_list<double>(bf_fraction, "bf fraction");
    cfg.precision = detail::parse_list<unsigned>(precision, "precision");
    if (!rho.empty()) detail::parse_rho(rho, cfg);

    std::ofstream audit;
    if (!audit_path.empty()) {
      audit.open(audit_path);
      if (!audit) throw error(errc::config_error, "cannot write '" + audit_path + "'");
      cfg.audit = [&audit](const nlohmann::json& j) { audit << j.dump() << '\n'; };
    }
    std::map<SwitchId, TwoStageFilter> last_filters;
    if (!dump_path.empty()) cfg.on_filters = [&last_filters](const auto& f) { last_filters = f; };

    ExperimentReport report;
    if (which == "count") report = run_flow_count(cfg);
    else if (which == "single-rate") report = run_single_rate(cfg);
    else report = run_multi_rate(cfg);

    if (!dump_path.empty()) detail::write_filter_dump(dump_path, last_filters);
    if (out_path.empty()) {
      report.write_csv(out);
    } else {
      std::ofstream f(out_path);
      if (!f) throw error(errc::config_error, "cannot write '" + out_path + "'");
      report.write_csv(f);
    }
    return 0;
  } catch (const parse_error& e) {
    err << "dcm-sim: " << e.what() << '\n';
    return 3;
  } catch (const error& e) {
    err << "dcm-sim: " << e.what() << '\n';
    return e.code() == errc::parse_error || e.code() == errc::format_error ? 3 : 2;
  } catch (const std::exception& e) {
    err << "dcm-sim: internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dcm
