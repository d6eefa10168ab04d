#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcm/cli.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "dcm-sim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = dcm::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string samples = DCM_SAMPLES_DIR;

}  // namespace

TEST(Cli, CountStudyToStdout) {
  const auto r = run({"count", "--topo", "star:1,2,2", "--trace", "synth:flows=30,epochs=4", "--memory", "4096,8192",
                      "--bf-fraction", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "method,memory_bytes,param,metric,value,seed,flows,packets");
  EXPECT_NE(r.out.find("dcm,8192,bf_fraction=0.1,overestimate_ratio,"), std::string::npos);
}

TEST(Cli, SampleFilesAndOutputs) {
  const auto out = temp_path("dcm_cli_out.csv");
  const auto audit = temp_path("dcm_cli_audit.jsonl");
  const auto dump = temp_path("dcm_cli_filters.bin");
  const auto r = run({"single-rate", "--topo", "file:" + samples + "/campus.topo", "--trace",
                      "file:" + samples + "/campus_trace.csv", "--memory", "2048", "--out", out, "--audit", audit,
                      "--dump-filters", dump});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(slurp(out).find("dcm,2048,-,report_bytes,"), std::string::npos);
  std::istringstream lines(slurp(audit));
  std::string line;
  std::size_t allocs = 0;
  while (std::getline(lines, line)) allocs += nlohmann::json::parse(line)["event"] == "allocate";
  EXPECT_EQ(allocs, 4u);
  const auto blob = slurp(dump);
  ASSERT_GE(blob.size(), 8u);
  EXPECT_EQ(blob.substr(0, 4), "DCMD");
  EXPECT_EQ(static_cast<unsigned char>(blob[4]), 5u);
}

TEST(Cli, MultiRateRuns) {
  const auto r = run({"multi-rate", "--topo", "fat-tree:2", "--trace", "synth:flows=20,epochs=3", "--memory", "512",
                      "--precision", "6", "--rho", "sample=5,count=10", "--period", "4", "--check", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("precision=6,wasted_sample_ratio"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"count", "--bogus"}).code, 2);
  EXPECT_EQ(run({"count", "--topo", "ring:3"}).code, 2);
  EXPECT_EQ(run({"count", "--method", "magic"}).code, 2);
  EXPECT_EQ(run({"count", "--memory", "abc"}).code, 2);
  EXPECT_EQ(run({"count", "--trace", "synth:flows=5", "--period", "5", "--check", "5"}).code, 2);
  EXPECT_EQ(run({"multi-rate", "--method", "monitor-all", "--trace", "synth:flows=5"}).code, 2);
  const auto r = run({"count", "--rho", "count"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config-error"), std::string::npos);
}

TEST(Cli, ParseErrorsExitThree) {
  const auto bad = temp_path("dcm_cli_bad.csv");
  {
    std::ofstream f(bad);
    f << "src_ip,dst_ip,src_port,dst_port,protocol,packets,src_host,dst_host,start_epoch,duration_epochs\n"
      << "10.0.0.1,10.0.0.2,1,2,6,five,0,1,0,1\n";
  }
  const auto r = run({"count", "--trace", "file:" + bad});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_NE(r.err.find("packets"), std::string::npos);
  EXPECT_EQ(run({"count", "--topo", "file:/no/such.topo"}).code, 3);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("count"), std::string::npos);
}
